/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

/**
 * @file model_io.hpp
 * @brief Text serialization of CurveModel.
 *
 * Format (whitespace separated, one record per line, numbers printed with
 * 17 significant digits so that reading back is exact):
 *
 *     curvecast-model 1
 *     order <k>
 *     knots <count> <t_1> ... <t_count>
 *     dims <N> <p> <q>
 *     sigma2 <value>
 *     mu <N values>
 *     L <p values>
 *     Sigma <q values>
 *     A <N*p values, row major>
 *     B <N*q values, row major>
 *
 * Lines starting with '#' are comments. Records may appear in any order
 * after the header line.
 */

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

inline constexpr int model_format_version = 1;

namespace detail {

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_values(std::ostream& out, const char* tag, const double* v, Eigen::Index n) {
  out << tag;
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << g17(v[i]);
  out << '\n';
}

}  // namespace detail

inline void write_model(const CurveModel& m, std::ostream& out) {
  out << "curvecast-model " << model_format_version << '\n';
  out << "order " << m.space.order() << '\n';
  out << "knots " << m.space.knots().size();
  for (double t : m.space.knots()) out << ' ' << detail::g17(t);
  out << '\n';
  out << "dims " << m.space.dimension() << ' ' << m.p() << ' ' << m.q() << '\n';
  out << "sigma2 " << detail::g17(m.sigma2) << '\n';
  detail::put_values(out, "mu", m.mu.data(), m.mu.size());
  detail::put_values(out, "L", m.L_diag.data(), m.L_diag.size());
  detail::put_values(out, "Sigma", m.Sigma_diag.data(), m.Sigma_diag.size());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> A = m.A, B = m.B;
  detail::put_values(out, "A", A.data(), A.size());
  detail::put_values(out, "B", B.data(), B.size());
}

inline void write_model(const CurveModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  write_model(m, out);
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

inline CurveModel read_model(std::istream& in, const std::string& source = "model") {
  const auto bad = [&](const std::string& msg) { fail(ErrorKind::schema, source + ": " + msg); };
  std::string line;
  while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
  }
  {
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != "curvecast-model") bad("not a curvecast model file");
    if (version != model_format_version) bad("unsupported model format version " + std::to_string(version));
  }
  std::map<std::string, std::vector<double>> rec;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag.empty()) continue;
    if (rec.count(tag)) bad("duplicate record '" + tag + "'");
    std::vector<double>& v = rec[tag];
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) bad("bad number '" + tok + "' in record '" + tag + "'");
      } catch (const std::logic_error&) {
        bad("bad number '" + tok + "' in record '" + tag + "'");
      }
    }
  }
  for (const char* tag : {"order", "knots", "dims", "sigma2", "mu", "L", "Sigma", "A", "B"})
    if (!rec.count(tag)) bad(std::string("missing record '") + tag + "'");
  const auto as_int = [&](double x, const char* what) {
    if (x != static_cast<double>(static_cast<long>(x)) || x < 0) bad(std::string("bad ") + what);
    return static_cast<int>(x);
  };
  if (rec["order"].size() != 1 || rec["dims"].size() != 3 || rec["sigma2"].size() != 1)
    bad("malformed header records");
  const int k = as_int(rec["order"][0], "order");
  auto& kn = rec["knots"];
  if (kn.empty() || as_int(kn[0], "knot count") != static_cast<int>(kn.size()) - 1) bad("knot count mismatch");
  const std::vector<double> knots(kn.begin() + 1, kn.end());
  const int N = as_int(rec["dims"][0], "N"), p = as_int(rec["dims"][1], "p"), q = as_int(rec["dims"][2], "q");
  const auto vec = [&](const char* tag, std::size_t n) {
    const auto& v = rec[tag];
    if (v.size() != n) bad(std::string("record '") + tag + "' has " + std::to_string(v.size()) + " values, expected " +
                           std::to_string(n));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n)));
  };
  const auto mat = [&](const char* tag, int cols) {
    const auto& v = rec[tag];
    if (v.size() != static_cast<std::size_t>(N) * cols) bad(std::string("record '") + tag + "' has wrong size");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::MatrixXd(Eigen::Map<const RowMajor>(v.data(), N, cols));
  };
  const SplineSpace space = [&] {
    try {
      return SplineSpace(KnotVector(knots, k));
    } catch (const Error& e) {
      fail(ErrorKind::schema, source + ": " + e.what());
    }
  }();
  CurveModel m{space, vec("mu", N), mat("A", p), vec("L", p), mat("B", q),
               vec("Sigma", q), rec["sigma2"][0]};
  if (m.space.dimension() != N) bad("knots imply dimension " + std::to_string(m.space.dimension()));
  m.validate();
  return m;
}

inline CurveModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read " + path);
  return read_model(in, path);
}

}  // namespace curvecast
