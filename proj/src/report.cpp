#include "eif/report.hpp"

#include "eif/text_format.hpp"

#include <fstream>
#include <sstream>

namespace eif {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s)
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted)
    throw FormatError("line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

nlohmann::json info_json(const SampleInfo& s) {
  nlohmann::json j = {{"id", s.id}};
  if (!s.role.empty())
    j["role"] = s.role;
  if (!s.label.empty())
    j["label"] = s.label;
  if (s.negates)
    j["negates"] = *s.negates;
  if (s.cls >= 0)
    j["class"] = s.cls;
  if (s.sigma != 0.0)
    j["sigma"] = s.sigma;
  if (!s.group.empty() && s.group != s.id)
    j["group"] = s.group;
  return j;
}

SampleInfo info_from_json(const nlohmann::json& j) {
  SampleInfo s;
  s.id = j.at("id").get<std::string>();
  s.role = j.value("role", std::string());
  s.label = j.value("label", std::string());
  if (j.contains("negates"))
    s.negates = j.at("negates").get<std::size_t>();
  s.cls = j.value("class", -1);
  s.sigma = j.value("sigma", 0.0);
  s.group = j.value("group", s.cls >= 0 ? s.id : std::string());
  return s;
}

} // namespace

std::string matrix_csv(const EifMatrix& m) {
  std::string out = "sample";
  for (const auto& s : m.manifest)
    out += "," + csv_field(s.id);
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += csv_field(m.manifest[i].id);
    for (std::size_t j = 0; j < m.size(); ++j)
      out += "," + (m.measured(i, j) ? format_real(m(i, j)) : std::string());
    out += "\n";
  }
  return out;
}

EifMatrix matrix_from_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos)
      end = text.size();
    ++lineno;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (!line.empty())
      rows.push_back(split_csv_line(line, lineno));
    start = end + 1;
  }
  if (rows.empty())
    throw FormatError("line 1: empty matrix file");
  const std::size_t n = rows[0].size() - 1;
  if (n < 1)
    throw FormatError("line 1: header has no sample columns");
  if (rows.size() != n + 1)
    throw FormatError("line " + std::to_string(rows.size()) + ": expected " +
                      std::to_string(n) + " data rows, found " + std::to_string(rows.size() - 1));
  EifMatrix m;
  m.values = SquareMatrix(n);
  m.mask.assign(n * n, 1);
  for (std::size_t k = 0; k < n; ++k)
    m.manifest.push_back({rows[0][k + 1], {}, {}, {}, -1, 0.0, {}});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    const std::string where = "line " + std::to_string(i + 2);
    if (r.size() != n + 1)
      throw FormatError(where + ": " + std::to_string(r.size()) + " fields, expected " +
                        std::to_string(n + 1));
    if (r[0] != m.manifest[i].id)
      throw FormatError(where + ": row id '" + r[0] + "' does not match column id '" +
                        m.manifest[i].id + "'");
    for (std::size_t j = 0; j < n; ++j) {
      if (r[j + 1].empty()) {
        m.mask[i * n + j] = 0;
        continue;
      }
      try {
        std::size_t used = 0;
        m.values(i, j) = std::stod(r[j + 1], &used);
        if (used != r[j + 1].size())
          throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError(where + ", field " + std::to_string(j + 2) + ": '" + r[j + 1] +
                          "' is not a number");
      }
    }
  }
  return m;
}

nlohmann::json to_json(const EifMatrix& m) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& s : m.manifest)
    manifest.push_back(info_json(s));
  nlohmann::json values = nlohmann::json::array();
  nlohmann::json mask = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array(), mrow = nlohmann::json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      row.push_back(m.measured(i, j) ? nlohmann::json(m(i, j)) : nlohmann::json());
      mrow.push_back(m.mask[i * m.size() + j]);
    }
    values.push_back(std::move(row));
    mask.push_back(std::move(mrow));
  }
  nlohmann::json j = {{"condition", to_string(m.condition)},
                      {"eta", m.eta},
                      {"architecture", m.architecture},
                      {"base_checksum", m.base_checksum},
                      {"domain", m.domain},
                      {"seed", m.seed},
                      {"n", m.size()},
                      {"manifest", manifest},
                      {"values", values},
                      {"mask", mask}};
  if (m.condition == Condition::prompted)
    j["separator"] = m.separator;
  return j;
}

EifMatrix matrix_from_json(const nlohmann::json& j) {
  try {
    EifMatrix m;
    m.condition = condition_from_string(j.at("condition").get<std::string>());
    m.eta = j.at("eta").get<double>();
    m.architecture = j.at("architecture").get<std::string>();
    m.base_checksum = j.at("base_checksum").get<std::string>();
    m.domain = j.value("domain", std::string());
    m.seed = j.value("seed", std::uint64_t{0});
    m.separator = j.value("separator", std::string());
    const auto n = j.at("n").get<std::size_t>();
    const auto& man = j.at("manifest");
    const auto& vals = j.at("values");
    const auto& mask = j.at("mask");
    if (man.size() != n || vals.size() != n || mask.size() != n)
      throw FormatError("field 'n': manifest/values/mask sizes disagree with n = " +
                        std::to_string(n));
    m.values = SquareMatrix(n);
    m.mask.assign(n * n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      m.manifest.push_back(info_from_json(man[i]));
      if (vals[i].size() != n || mask[i].size() != n)
        throw FormatError("field 'values[" + std::to_string(i) + "]': expected " +
                          std::to_string(n) + " entries");
      for (std::size_t k = 0; k < n; ++k) {
        m.mask[i * n + k] = mask[i][k].get<std::uint8_t>();
        if (m.mask[i * n + k])
          m.values(i, k) = vals[i][k].get<double>();
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("matrix JSON: ") + e.what());
  }
}

nlohmann::json to_json(const Histogram& h) {
  return {{"edges", h.edges},
          {"counts", h.counts},
          {"include_diagonal", h.include_diagonal},
          {"selected", h.selected},
          {"tau", h.tau},
          {"sparsity_fraction", h.sparsity_fraction},
          {"negative_tail_fraction", h.negative_tail_fraction}};
}

Histogram histogram_from_json(const nlohmann::json& j) {
  try {
    Histogram h;
    h.edges = j.at("edges").get<std::vector<double>>();
    h.counts = j.at("counts").get<std::vector<std::size_t>>();
    h.include_diagonal = j.at("include_diagonal").get<bool>();
    h.selected = j.at("selected").get<std::size_t>();
    h.tau = j.at("tau").get<double>();
    h.sparsity_fraction = j.at("sparsity_fraction").get<double>();
    h.negative_tail_fraction = j.at("negative_tail_fraction").get<double>();
    if (h.edges.size() != h.counts.size() + 1)
      throw FormatError("field 'edges': need counts + 1 = " + std::to_string(h.counts.size() + 1) +
                        " entries, found " + std::to_string(h.edges.size()));
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("histogram JSON: ") + e.what());
  }
}

nlohmann::json matrix_metrics(const EifMatrix& m, const HistogramOptions& opts,
                              std::uint64_t seed) {
  const auto tend = symmetric_tendency(m.values, seed);
  return {{"condition", to_string(m.condition)},
          {"domain", m.domain},
          {"n", m.size()},
          {"missing", m.missing_count()},
          {"symmetry_score", symmetry_score(m.values)},
          {"symmetric_tendency", {{"r", tend.r}, {"r_control", tend.r_control}}},
          {"histogram", to_json(diffusivity_histogram(m, opts))}};
}

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in)
    throw FormatError("cannot open '" + p.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

EifMatrix load_matrix(const std::filesystem::path& p) {
  if (p.extension() == ".csv") {
    std::ifstream in(p);
    if (!in)
      throw FormatError("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return matrix_from_csv(ss.str());
    } catch (const FormatError& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
  }
  return matrix_from_json(load_json(p));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out)
      throw std::runtime_error("cannot write '" + partial.string() + "'");
  }
  std::filesystem::rename(partial, path);
}

} // namespace eif
