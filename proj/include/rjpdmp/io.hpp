#pragma once

// File formats: dataset CSV (+ JSON sidecar), skeleton CSV, Gibbs chain CSV.
// Doubles are written with 17 significant digits so files round-trip exactly.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/gibbs.hpp"
#include "rjpdmp/state.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp::io {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt(double x) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline double parse_double(std::string_view s, const std::string& where) {
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw IoError(where + ": cannot parse number '" + tmp + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().remove_suffix(1);
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return f;
}

// ---------------------------------------------------------------------------
// Dataset: header "y,x_0,...,x_{p-1}", one row per observation.

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  auto f = open_out(path);
  f << "y";
  for (Index j = 0; j < d.p(); ++j) f << ",x_" << j;
  f << '\n';
  for (Index i = 0; i < d.n(); ++i) {
    f << fmt(d.y[i]);
    for (Index j = 0; j < d.p(); ++j) f << ',' << fmt(d.X(i, j));
    f << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

inline Dataset read_dataset_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": missing header row");
  const auto header = split(line);
  if (header.size() < 2) throw IoError(path + ": need a response column and at least one covariate");
  const std::size_t cols = header.size();
  std::vector<double> vals;
  Index rows = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != cols)
      throw IoError(path + ": row " + std::to_string(rows + 2) + " has " + std::to_string(cells.size()) +
                    " fields, expected " + std::to_string(cols));
    for (const auto& c : cells) vals.push_back(parse_double(c, path + " row " + std::to_string(rows + 2)));
    ++rows;
  }
  Dataset d;
  const Index p = static_cast<Index>(cols) - 1;
  d.X = Matrix(rows, p);
  d.y = Vector(rows);
  for (Index i = 0; i < rows; ++i) {
    d.y[i] = vals[static_cast<std::size_t>(i) * cols];
    for (Index j = 0; j < p; ++j) d.X(i, j) = vals[static_cast<std::size_t>(i) * cols + 1 + static_cast<std::size_t>(j)];
  }
  return d;
}

inline void write_json(const std::string& path, const json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

inline json read_json(const std::string& path) {
  auto f = open_in(path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid JSON: " + e.what());
  }
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Skeleton: header "t,kind,coord,theta_*,vel_*,gamma_*". The first row (kind
// "start") is the initial state and the last row (kind "end") is the state at
// the final time.

inline void write_skeleton_header(std::ostream& f, Index p) {
  f << "t,kind,coord";
  for (const char* prefix : {"theta_", "vel_", "gamma_"})
    for (Index j = 0; j < p; ++j) f << ',' << prefix << j;
  f << '\n';
}

inline void write_skeleton_row(std::ostream& f, double t, std::string_view kind, Index coord, const SamplerState& s) {
  f << fmt(t) << ',' << kind << ',' << coord;
  for (Index j = 0; j < s.dim(); ++j) f << ',' << fmt(s.theta[j]);
  for (Index j = 0; j < s.dim(); ++j) f << ',' << fmt(s.vel[j]);
  for (Index j = 0; j < s.dim(); ++j) f << ',' << (s.gamma[j] ? 1 : 0);
  f << '\n';
}

inline void write_skeleton_csv(const std::string& path, const Skeleton& sk) {
  auto f = open_out(path);
  write_skeleton_header(f, sk.dim());
  write_skeleton_row(f, sk.initial.t, "start", -1, sk.initial);
  const SamplerState* last = &sk.initial;
  for (const auto& e : sk.events) {
    write_skeleton_row(f, e.t, to_string(e.kind), e.coord, e.state_after);
    last = &e.state_after;
  }
  SamplerState end = *last;
  if (sk.t_final > end.t) {
    end.theta = position_at(*last, sk.t_final);
    end.t = sk.t_final;
  }
  write_skeleton_row(f, sk.t_final, "end", -1, end);
  if (!f) throw IoError("write failed: " + path);
}

inline Skeleton read_skeleton_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": missing header row");
  const auto header = split(line);
  if (header.size() < 6 || (header.size() - 3) % 3 != 0) throw IoError(path + ": malformed skeleton header");
  const Index p = static_cast<Index>((header.size() - 3) / 3);
  Skeleton sk;
  bool have_start = false, have_end = false;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split(line);
    const std::string where = path + " row " + std::to_string(row);
    if (c.size() != header.size()) throw IoError(where + ": wrong field count");
    SamplerState s(p);
    s.t = parse_double(c[0], where);
    for (Index j = 0; j < p; ++j) {
      s.theta[j] = parse_double(c[3 + j], where);
      s.vel[j] = parse_double(c[3 + p + j], where);
      s.gamma[j] = parse_double(c[3 + 2 * p + j], where) != 0.0;
    }
    const std::string kind(c[1]);
    const Index coord = static_cast<Index>(parse_double(c[2], where));
    if (kind == "start") {
      sk.initial = s;
      have_start = true;
    } else if (kind == "end") {
      sk.t_final = s.t;
      have_end = true;
    } else {
      const auto k = event_kind_from_string(kind);
      if (!k) throw IoError(where + ": unknown event kind '" + kind + "'");
      sk.events.push_back({s.t, *k, coord, s});
    }
  }
  if (!have_start || !have_end) throw IoError(path + ": skeleton needs start and end rows");
  return sk;
}

// ---------------------------------------------------------------------------
// Gibbs chain: header "iter,gamma_*,theta_*".

inline void write_chain_header(std::ostream& f, Index p) {
  f << "iter";
  for (Index j = 0; j < p; ++j) f << ",gamma_" << j;
  for (Index j = 0; j < p; ++j) f << ",theta_" << j;
  f << '\n';
}

inline void write_chain_row(std::ostream& f, std::uint64_t iter, const Mask& gamma, const Vector& theta) {
  f << iter;
  for (bool g : gamma) f << ',' << (g ? 1 : 0);
  for (Index j = 0; j < theta.size(); ++j) f << ',' << fmt(theta[j]);
  f << '\n';
}

}  // namespace rjpdmp::io
