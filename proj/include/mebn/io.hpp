#pragma once

// Data CSV and model JSON formats.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "mebn/dataset.hpp"
#include "mebn/errors.hpp"
#include "mebn/lme.hpp"
#include "mebn/model.hpp"

namespace mebn {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

}  // namespace detail

// Reads a grouped data CSV: header row, one group column, every other column
// numeric, no missing values. Group labels are the sorted distinct values.
inline GroupedDataset read_dataset_csv(std::istream& in, const std::string& group_column = "F") {
  std::string line;
  if (!std::getline(in, line)) throw DataError("data CSV is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  std::size_t gcol = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == group_column) gcol = c;
  if (gcol == header.size()) throw DataError("data CSV has no group column '" + group_column + "'");

  GroupedDataset d;
  d.group_column = group_column;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != gcol) d.columns.push_back(header[c]);
  if (d.columns.empty()) throw DataError("data CSV has no continuous columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto cell = detail::trim(cells[c]);
      if (cell.empty())
        throw DataError("line " + std::to_string(lineno) + ", column '" + header[c] + "': missing value");
      if (c == gcol) {
        labels.push_back(cell);
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw DataError("line " + std::to_string(lineno) + ", column '" + header[c] + "': non-numeric value '" +
                        cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  std::set<std::string> distinct(labels.begin(), labels.end());
  d.group_labels.assign(distinct.begin(), distinct.end());
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < d.group_labels.size(); ++j) index[d.group_labels[j]] = static_cast<int>(j);
  d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d.columns.size(); ++c)
      d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    d.groups.push_back(index.at(labels[r]));
  }
  d.validate();
  return d;
}

inline GroupedDataset read_dataset_csv(const std::string& path, const std::string& group_column = "F") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return read_dataset_csv(in, group_column);
}

// Variables first, group column last.
inline void write_dataset_csv(std::ostream& out, const GroupedDataset& d) {
  for (const auto& c : d.columns) out << c << ',';
  out << d.group_column << '\n';
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.values.cols(); ++c) out << format_double(d.values(r, c)) << ',';
    out << d.group_labels[static_cast<std::size_t>(d.groups[static_cast<std::size_t>(r)])] << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const GroupedDataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_dataset_csv(out, d);
}

// ---------------------------------------------------------------------------
// Model JSON

namespace detail {

inline Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::VectorXd vector_from_json(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

inline Json to_json(const LinearGaussian& lg) {
  return Json{{"intercept", lg.intercept}, {"coefficients", to_json(lg.coefficients)}, {"variance", lg.variance}};
}

inline LinearGaussian linear_from_json(const Json& j) {
  return {j.at("intercept").get<double>(), vector_from_json(j.at("coefficients")), j.at("variance").get<double>()};
}

}  // namespace detail

inline Json model_to_json(const BnModel& m, std::optional<double> score = std::nullopt) {
  Json j;
  j["version"] = kModelFormatVersion;
  j["strategy"] = to_string(m.strategy);
  j["nodes"] = m.dag.nodes();
  j["group_node"] = m.group_node;
  Json arcs = Json::array();
  for (auto a : m.dag.arcs()) arcs.push_back({m.dag.name(a.from), m.dag.name(a.to)});
  j["arcs"] = arcs;
  j["group_labels"] = m.group_labels;
  j["group_prior"] = detail::to_json(m.group_prior);
  if (score) j["score"] = *score;
  Json locals = Json::object();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& local = m.locals[i];
    Json l;
    std::vector<std::string> parents;
    for (auto p : local.parents) parents.push_back(m.variables[p]);
    l["parents"] = parents;
    l["loglik"] = local.loglik;
    if (auto* p = std::get_if<PooledLocal>(&local.params)) {
      l["variant"] = "pooled";
      l.update(detail::to_json(p->params));
    } else if (auto* g = std::get_if<PerGroupLocal>(&local.params)) {
      l["variant"] = "per_group";
      Json gs = Json::array();
      for (const auto& lg : g->groups) gs.push_back(detail::to_json(lg));
      l["groups"] = gs;
      l["degenerate"] = g->degenerate;
    } else {
      const auto& f = std::get<MixedLocal>(local.params).fit;
      l["variant"] = "mixed";
      l["beta"] = detail::to_json(f.beta);
      Json blups = Json::array();
      for (const auto& b : f.blups) blups.push_back(detail::to_json(b));
      l["blups"] = blups;
      l["sigma2"] = f.sigma2;
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < f.Sigma.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c <= r; ++c) row.push_back(f.Sigma(r, c));
        rows.push_back(row);
      }
      l["Sigma"] = rows;
      l["converged"] = f.converged;
      l["boundary"] = f.boundary;
    }
    locals[m.variables[i]] = l;
  }
  j["locals"] = locals;
  return j;
}

inline BnModel model_from_json(const Json& j) {
  try {
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("version").dump());
    BnModel m;
    m.strategy = parse_strategy(j.at("strategy").get<std::string>());
    m.group_node = j.value("group_node", std::string("F"));
    auto nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& n : nodes)
      if (n != m.group_node) m.variables.push_back(n);
    m.dag = canonical_dag(m.variables, m.group_node, m.strategy);
    for (const auto& a : j.at("arcs")) {
      auto u = a.at(0).get<std::string>(), v = a.at(1).get<std::string>();
      if (u == m.group_node) continue;
      m.dag.set_arc(m.dag.index_of(u), m.dag.index_of(v), true);
    }
    if (!m.dag.acyclic()) throw DataError("model arcs contain a cycle");
    m.group_labels = j.at("group_labels").get<std::vector<std::string>>();
    m.group_prior = detail::vector_from_json(j.at("group_prior"));
    if (static_cast<std::size_t>(m.group_prior.size()) != m.group_labels.size())
      throw DataError("group_prior and group_labels differ in length");
    const auto& locals = j.at("locals");
    for (const auto& name : m.variables) {
      const auto& l = locals.at(name);
      LocalDistribution local;
      for (const auto& p : l.at("parents")) local.parents.push_back(m.dag.index_of(p.get<std::string>()));
      std::sort(local.parents.begin(), local.parents.end());
      local.loglik = l.value("loglik", 0.0);
      const auto variant = l.at("variant").get<std::string>();
      if (variant == "pooled") {
        local.params = PooledLocal{detail::linear_from_json(l)};
      } else if (variant == "per_group") {
        PerGroupLocal pg;
        for (const auto& g : l.at("groups")) pg.groups.push_back(detail::linear_from_json(g));
        pg.degenerate = l.value("degenerate", false);
        if (pg.groups.size() != m.group_labels.size()) throw DataError("local '" + name + "': wrong group count");
        local.params = std::move(pg);
      } else if (variant == "mixed") {
        LmeFit f;
        f.beta = detail::vector_from_json(l.at("beta"));
        for (const auto& b : l.at("blups")) f.blups.push_back(detail::vector_from_json(b));
        f.sigma2 = l.at("sigma2").get<double>();
        const auto q = f.beta.size();
        f.Sigma = Eigen::MatrixXd::Zero(q, q);
        const auto& rows = l.at("Sigma");
        for (Eigen::Index r = 0; r < q; ++r)
          for (Eigen::Index c = 0; c <= r; ++c)
            f.Sigma(r, c) = f.Sigma(c, r) = rows.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        f.loglik = local.loglik;
        f.converged = l.value("converged", true);
        f.boundary = l.value("boundary", false);
        if (f.blups.size() != m.group_labels.size()) throw DataError("local '" + name + "': wrong BLUP count");
        local.params = MixedLocal{std::move(f)};
      } else {
        throw DataError("local '" + name + "': unknown variant '" + variant + "'");
      }
      if (local.for_group(0).coefficients.size() != static_cast<Eigen::Index>(local.parents.size()))
        throw DataError("local '" + name + "': coefficient count does not match parents");
      m.locals.push_back(std::move(local));
    }
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
}

inline void write_model_json(const std::string& path, const BnModel& m, std::optional<double> score = std::nullopt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << model_to_json(m, score).dump(1) << '\n';
}

inline BnModel read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mebn
