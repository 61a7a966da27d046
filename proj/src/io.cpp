#include "trp/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "trp/errors.hpp"

namespace trp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_field(const std::string& field, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError("invalid numeric field '" + field + "' at row " +
                     std::to_string(row) + " column " + std::to_string(col));
  }
  return value;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string resolve_path(const std::filesystem::path& base,
                         const std::string& entry) {
  std::filesystem::path p(entry);
  if (p.is_absolute()) return p.string();
  return (base / p).lexically_normal().string();
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("dataset file is empty: " + path);
  }
  const auto header = split_csv_line(strip_cr(line));
  if (header.empty() || header[0] != "y") {
    throw ParseError("dataset header must start with column 'y': " + path);
  }
  const std::size_t n_cols = header.size();
  if (n_cols < 2) {
    throw ParseError("dataset needs at least one covariate column: " + path);
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    const std::string stripped = strip_cr(line);
    if (stripped.empty()) continue;
    const auto fields = split_csv_line(stripped);
    if (fields.size() != n_cols) {
      throw ParseError("expected " + std::to_string(n_cols) + " fields at row " +
                       std::to_string(row_number) + ", got " +
                       std::to_string(fields.size()) + ": " + path);
    }
    std::vector<double> parsed(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
      parsed[c] = parse_field(fields[c], row_number, c + 1);
    }
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) {
    throw ParseError("dataset has no data rows: " + path);
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(n_cols - 1);
  Matrix x(n, p);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = rows[static_cast<std::size_t>(i)][0];
    for (Eigen::Index j = 0; j < p; ++j) {
      x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1];
    }
  }
  return Dataset(std::move(x), std::move(y));
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << "y";
  for (Eigen::Index j = 0; j < dataset.p(); ++j) out << ",x" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    out << format_double(dataset.y[i]);
    for (Eigen::Index j = 0; j < dataset.p(); ++j) {
      out << "," << format_double(dataset.X(i, j));
    }
    out << "\n";
  }
  if (!out) throw IoError("failed while writing: " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest is not valid JSON: " + path + " (" + e.what() +
                     ")");
  }
  if (!doc.is_object()) throw ParseError("manifest root must be an object");
  if (!doc.contains("target") || !doc["target"].is_string()) {
    throw ParseError("manifest needs a string field 'target'");
  }
  if (!doc.contains("sources") || !doc["sources"].is_array()) {
    throw ParseError("manifest needs an array field 'sources'");
  }

  const auto base = std::filesystem::path(path).parent_path();
  Manifest m;
  m.target = resolve_path(base, doc["target"].get<std::string>());
  for (const auto& entry : doc["sources"]) {
    if (!entry.is_string()) {
      throw ParseError("manifest sources must all be strings");
    }
    m.sources.push_back(resolve_path(base, entry.get<std::string>()));
  }
  if (m.sources.empty()) {
    throw ParseError("manifest needs at least one source dataset");
  }
  if (doc.contains("standardize")) {
    if (!doc["standardize"].is_boolean()) {
      throw ParseError("manifest field 'standardize' must be a boolean");
    }
    m.standardize = doc["standardize"].get<bool>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw ParseError("manifest field 'seed' must be a nonnegative integer");
    }
    m.seed = doc["seed"].get<std::uint64_t>();
  }
  return m;
}

TransferProblem load_problem(const Manifest& manifest) {
  Dataset target = load_dataset(manifest.target);
  std::vector<Dataset> sources;
  sources.reserve(manifest.sources.size());
  for (const auto& path : manifest.sources) {
    sources.push_back(load_dataset(path));
  }
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (sources[k].p() != target.p()) {
      throw DimensionError("source dataset " + std::to_string(k + 1) +
                           " has " + std::to_string(sources[k].p()) +
                           " covariates, target has " +
                           std::to_string(target.p()));
    }
  }

  if (manifest.standardize) {
    const Eigen::Index p = target.p();
    Vector mean(p), scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mu = target.X.col(j).mean();
      const double var =
          (target.X.col(j).array() - mu).square().sum() /
          static_cast<double>(target.n());
      const double sd = std::sqrt(var);
      mean[j] = mu;
      scale[j] = sd;
    }
    auto apply = [&](Dataset& d) {
      Matrix x = d.X;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (scale[j] < 1e-12) continue;
        x.col(j) = (x.col(j).array() - mean[j]) / scale[j];
      }
      d = Dataset(std::move(x), d.y);
    };
    apply(target);
    for (auto& s : sources) apply(s);
  }

  return TransferProblem(std::move(target), std::move(sources));
}

void save_draws(const std::string& csv_path, const std::string& meta_path,
                const PosteriorDraws& draws) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open file for writing: " + csv_path);

  bool first = true;
  for (const auto& [name, span] : draws.layout) {
    const int width = span.second - span.first;
    for (int i = 0; i < width; ++i) {
      if (!first) csv << ",";
      first = false;
      if (width == 1) {
        csv << name;
      } else {
        csv << name << "_" << (i + 1);
      }
    }
  }
  csv << "\n";
  for (Eigen::Index r = 0; r < draws.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < draws.draws.cols(); ++c) {
      if (c > 0) csv << ",";
      csv << format_double(draws.draws(r, c));
    }
    csv << "\n";
  }
  if (!csv) throw IoError("failed while writing: " + csv_path);

  nlohmann::ordered_json meta;
  meta["p"] = draws.p;
  meta["k"] = draws.k;
  meta["draw_count"] = draws.count();
  nlohmann::ordered_json cfg;
  cfg["n_iter"] = draws.config.n_iter;
  cfg["n_burnin"] = draws.config.n_burnin;
  cfg["thin"] = draws.config.thin;
  cfg["n_temperatures"] = draws.config.n_temperatures;
  cfg["temperature_spacing"] = draws.config.temperature_spacing;
  cfg["prior_kind"] =
      draws.config.prior_kind == PriorKind::laplace ? "laplace" : "gaussian";
  cfg["hyper_update_kind"] =
      draws.config.hyper_update_kind == HyperUpdateKind::slice
          ? "slice"
          : "inverse-gamma";
  cfg["seed"] = draws.config.seed;
  if (draws.config.tau_fixed) cfg["tau_fixed"] = *draws.config.tau_fixed;
  meta["config"] = cfg;
  nlohmann::ordered_json layout = nlohmann::ordered_json::array();
  for (const auto& [name, span] : draws.layout) {
    layout.push_back({{"name", name},
                      {"offset", span.first},
                      {"width", span.second - span.first}});
  }
  meta["layout"] = layout;
  nlohmann::ordered_json stats;
  for (const auto& [name, value] : draws.acceptance_stats) stats[name] = value;
  meta["acceptance_stats"] = stats;
  meta["swap_rates"] = draws.swap_stats;

  std::ofstream mj(meta_path);
  if (!mj) throw IoError("cannot open file for writing: " + meta_path);
  mj << meta.dump(2) << "\n";
  if (!mj) throw IoError("failed while writing: " + meta_path);
}

}  // namespace trp
