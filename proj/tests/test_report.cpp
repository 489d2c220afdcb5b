#include "eif/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>

using namespace eif;

namespace {

EifMatrix sample_matrix() {
  EifMatrix m;
  m.values = SquareMatrix(3, std::vector<double>{-0.1, 1e-17, 0.3333333333333333, 2.5, -7.25e-9, 0,
                                                  1, 2, 3});
  m.mask.assign(9, 1);
  m.mask[5] = 0;
  m.manifest = {{"a", "training", {}, {}, -1, 0.0, {}},
                {"b,quoted", "evaluation", "negation", 0, -1, 0.0, {}},
                {"c", "evaluation", "expected-implication", {}, -1, 0.0, {}}};
  m.condition = Condition::prompted;
  m.separator = "\n";
  m.eta = 1e-4;
  m.architecture = "tiny_lm";
  m.base_checksum = "abc";
  m.domain = "transitivity";
  m.seed = 12;
  return m;
}

std::vector<std::string> fills(const std::string& svg) {
  std::vector<std::string> out;
  const std::regex re("<rect x=\"[0-9.]+\" y=\"[0-9.]+\" width=\"[0-9.]+\" height=\"[0-9.]+\" fill=\"(#[0-9a-f]{6})\"/>");
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it)
    out.push_back((*it)[1]);
  return out;
}

} // namespace

TEST(Csv, RoundTripIsExact) {
  const auto m = sample_matrix();
  const auto csv = matrix_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample,a,\"b,quoted\",c");
  const auto back = matrix_from_csv(csv);
  EXPECT_EQ(back.mask, m.mask);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (m.measured(i, j))
        EXPECT_EQ(back(i, j), m(i, j));
  EXPECT_EQ(back.manifest[1].id, "b,quoted");
  EXPECT_EQ(matrix_csv(back), csv);
}

TEST(Csv, DiagnosticsNameLineAndField) {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      matrix_from_csv(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("", "line 1");
  expect_error("sample,a,b\na,1,2\nb,3,x\n", "line 3, field 3");
  expect_error("sample,a,b\na,1,2\nb,3\n", "line 3");
  expect_error("sample,a,b\na,1,2\nz,3,4\n", "line 3");
  expect_error("sample,a,b\na,1,2\n", "expected 2 data rows");
}

TEST(Json, RoundTripIsExact) {
  const auto m = sample_matrix();
  const auto j = to_json(m);
  EXPECT_TRUE(j.at("values")[1][2].is_null());
  const auto back = matrix_from_json(j);
  EXPECT_EQ(back.manifest, m.manifest);
  EXPECT_EQ(back.mask, m.mask);
  EXPECT_EQ(back.separator, "\n");
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.values(0, 1), 1e-17);
}

TEST(Json, MalformedNamesField) {
  auto j = to_json(sample_matrix());
  j["n"] = 4;
  EXPECT_THROW(matrix_from_json(j), FormatError);
  j = to_json(sample_matrix());
  j.erase("condition");
  try {
    matrix_from_json(j);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos) << e.what();
  }
}

TEST(Json, HistogramRoundTrip) {
  const auto h = diffusivity_histogram(sample_matrix());
  const auto j = to_json(h);
  EXPECT_EQ(to_json(histogram_from_json(j)), j);
  auto bad = j;
  bad["edges"] = {0.0};
  EXPECT_THROW(histogram_from_json(bad), FormatError);
}

TEST(Files, AtomicWriteAndLoad) {
  const auto dir = std::filesystem::temp_directory_path() / "eif_report_test";
  std::filesystem::remove_all(dir);
  const auto m = sample_matrix();
  write_file_atomic(dir / "sub" / "m.csv", matrix_csv(m));
  write_file_atomic(dir / "m.json", to_json(m).dump());
  EXPECT_FALSE(std::filesystem::exists(dir / "m.json.partial"));
  EXPECT_EQ(load_matrix(dir / "sub" / "m.csv").mask, m.mask);
  EXPECT_EQ(load_matrix(dir / "m.json").manifest, m.manifest);
  {
    std::ofstream(dir / "bad.json") << "{ nope";
  }
  EXPECT_THROW(load_matrix(dir / "bad.json"), FormatError);
  EXPECT_THROW(load_matrix(dir / "missing.csv"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Metrics, Document) {
  const auto j = matrix_metrics(sample_matrix());
  EXPECT_EQ(j.at("missing"), 1);
  EXPECT_TRUE(j.contains("symmetry_score"));
  EXPECT_TRUE(j.at("histogram").contains("counts"));
}

TEST(Svg, DiagonalMatrixCells) {
  EifMatrix m;
  m.values = SquareMatrix(2, std::vector<double>{-1, 0, 0, -1});
  m.mask.assign(4, 1);
  m.manifest = {{"x", {}, {}, {}, -1, 0.0, {}}, {"y", {}, {}, {}, -1, 0.0, {}}};
  const auto svg = render_heatmap_svg(m);
  const auto f = fills(svg);
  ASSERT_GE(f.size(), 4u);
  const auto dark = diverging_color(-1.0), neutral = diverging_color(0.0);
  EXPECT_EQ(f[0], dark);
  EXPECT_EQ(f[1], neutral);
  EXPECT_EQ(f[2], neutral);
  EXPECT_EQ(f[3], dark);
  EXPECT_NE(svg.find(">x</text>"), std::string::npos);
  EXPECT_EQ(neutral, "#f7f7f7");
  EXPECT_EQ(dark, "#053061");
}

TEST(Svg, ZeroMatrixUniformNeutral) {
  EifMatrix m;
  m.values = SquareMatrix(5);
  m.mask.assign(25, 1);
  for (int k = 0; k < 5; ++k)
    m.manifest.push_back({"s" + std::to_string(k), {}, {}, {}, -1, 0.0, {}});
  const auto f = fills(render_heatmap_svg(m));
  for (std::size_t k = 0; k < 25; ++k)
    EXPECT_EQ(f[k], "#f7f7f7");
}

TEST(Svg, HistogramOfZerosSingleFullBin) {
  Histogram h = diffusivity_histogram(SquareMatrix(11)); // 110 off-diagonal zeros
  std::vector<double> v(100, 0.0);
  HistogramOptions o;
  o.include_diagonal = true;
  h = diffusivity_histogram(SquareMatrix(10, v), o);
  std::size_t full = 0;
  for (auto c : h.counts)
    if (c) {
      EXPECT_EQ(c, 100u);
      ++full;
    }
  EXPECT_EQ(full, 1u);
  const auto svg = render_histogram_svg(h);
  EXPECT_NE(svg.find("peak 100"), std::string::npos);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
}
