#pragma once

#include "eif/eif.hpp"
#include "eif/metrics.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace eif {

//! Malformed artifact; the message names the line or field.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Header row and first column carry sample ids; masked cells are empty.
std::string matrix_csv(const EifMatrix& m);
EifMatrix matrix_from_csv(std::string_view text);

nlohmann::json to_json(const EifMatrix& m);
EifMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Histogram& h);
Histogram histogram_from_json(const nlohmann::json& j);

//! Metrics document for one matrix: symmetry, histogram, symmetric tendency.
nlohmann::json matrix_metrics(const EifMatrix& m, const HistogramOptions& opts = {},
                              std::uint64_t seed = 0);

//! Reads a matrix from .json or .csv (chosen by extension).
EifMatrix load_matrix(const std::filesystem::path& p);
nlohmann::json load_json(const std::filesystem::path& p);

//! Writes `path.partial` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

//! Diverging palette centred at 0: negative (facilitation) blue, positive red.
std::string render_heatmap_svg(const EifMatrix& m, std::string_view title = {});
std::string render_histogram_svg(const Histogram& h, std::string_view title = {});
//! RGB hex for t in [-1, 1].
std::string diverging_color(double t);

} // namespace eif
