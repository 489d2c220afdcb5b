#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eif {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

enum class ImageSource { fashion, mnist, mnist_noisy };

struct ImageSample {
  std::vector<double> pixels; // kImagePixels values, row-major
  int label = 0;
  ImageSource source = ImageSource::fashion;
  double sigma = 0.0; // noise level, meaningful for mnist_noisy
  std::string id;
  std::string group; // underlying clean image, shared across noise levels
};

enum class SampleRole { training, evaluation };

//! What an evaluation text probes for.
enum class Desideratum { expected_implication, forbidden_reversal, negation, hedge, out_of_domain };

std::string_view to_string(ImageSource s);
std::string_view to_string(SampleRole r);
std::string_view to_string(Desideratum d);
Desideratum desideratum_from_string(std::string_view s);
SampleRole role_from_string(std::string_view s);

struct TextSample {
  std::vector<int> context; // conditioned on, never scored
  std::vector<int> target;  // scored tokens, non-empty
  std::string text;
  std::string id;
  std::string domain;
  SampleRole role = SampleRole::evaluation;
  std::optional<Desideratum> label;
  std::optional<std::size_t> negates; // index of the item this one negates
};

//! Feature vector with a class label, for the small MLP / linear models.
struct VectorSample {
  std::vector<double> features;
  int label = 0;
  std::string id;
};

using Sample = std::variant<ImageSample, TextSample, VectorSample>;

const std::string& sample_id(const Sample& s);

TextSample make_text_sample(std::string text, std::string id = {});

} // namespace eif
