#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"

namespace seqdml {

// Floats in every emitted file carry 17 significant digits so that parsing
// them back reproduces the exact double.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    std::size_t i = 0;
    while (i < f.size() && f[i] == ' ') ++i;
    f.erase(0, i);
  }
  return out;
}

inline double parse_double(const std::string& field, std::size_t line_no,
                           const std::string& col) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error("file_error", "cannot parse number '" + field + "' in column " +
                                  col + ", line " + std::to_string(line_no));
  }
  return v;
}

inline int parse_int(const std::string& field, std::size_t line_no,
                     const std::string& col) {
  int v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error("file_error", "column " + col + " must be integer-coded; got '" +
                                  field + "' at line " +
                                  std::to_string(line_no));
  }
  return v;
}

}  // namespace detail

// Reads the dataset contract: header row with columns y2, d1, d2, covariates
// prefixed x0_ / x1_, and an optional s column. Comma separator, '.' decimal
// point. A custom subgroup column name may stand in for "s".
inline PanelDataset read_dataset_csv(const std::string& path,
                                     const std::string& s_col = "s") {
  std::ifstream in(path);
  if (!in) throw Error("file_error", "cannot open input file: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw Error("file_error", "empty input file: " + path);
  }
  const auto header = detail::split_csv_line(line);

  int col_y2 = -1, col_d1 = -1, col_d2 = -1, col_s = -1;
  std::vector<int> cols_x0, cols_x1;
  std::vector<std::string> x0_names, x1_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (h == "y2") {
      col_y2 = static_cast<int>(j);
    } else if (h == "d1") {
      col_d1 = static_cast<int>(j);
    } else if (h == "d2") {
      col_d2 = static_cast<int>(j);
    } else if (h == s_col) {
      col_s = static_cast<int>(j);
    } else if (h.rfind("x0_", 0) == 0) {
      cols_x0.push_back(static_cast<int>(j));
      x0_names.push_back(h);
    } else if (h.rfind("x1_", 0) == 0) {
      cols_x1.push_back(static_cast<int>(j));
      x1_names.push_back(h);
    } else {
      throw Error("file_error", "unrecognized column '" + h +
                                    "'; expected y2, d1, d2, x0_*, x1_*, s");
    }
  }
  if (col_y2 < 0 || col_d1 < 0 || col_d2 < 0) {
    throw Error("file_error", "input must contain y2, d1 and d2 columns");
  }

  std::vector<double> y2;
  std::vector<int> d1, d2, s;
  std::vector<std::vector<double>> x0(cols_x0.size()), x1(cols_x1.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error("file_error",
                  "line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    y2.push_back(detail::parse_double(fields[col_y2], line_no, "y2"));
    d1.push_back(detail::parse_int(fields[col_d1], line_no, "d1"));
    d2.push_back(detail::parse_int(fields[col_d2], line_no, "d2"));
    if (col_s >= 0) s.push_back(detail::parse_int(fields[col_s], line_no, "s"));
    for (std::size_t c = 0; c < cols_x0.size(); ++c) {
      x0[c].push_back(
          detail::parse_double(fields[cols_x0[c]], line_no, x0_names[c]));
    }
    for (std::size_t c = 0; c < cols_x1.size(); ++c) {
      x1[c].push_back(
          detail::parse_double(fields[cols_x1[c]], line_no, x1_names[c]));
    }
  }
  const auto n = static_cast<Eigen::Index>(y2.size());
  if (n == 0) throw Error("file_error", "input has a header but no rows");

  Eigen::VectorXd vy2 = Eigen::Map<Eigen::VectorXd>(y2.data(), n);
  Eigen::VectorXi vd1 = Eigen::Map<Eigen::VectorXi>(d1.data(), n);
  Eigen::VectorXi vd2 = Eigen::Map<Eigen::VectorXi>(d2.data(), n);
  Eigen::MatrixXd mx0(n, static_cast<Eigen::Index>(x0.size()));
  for (std::size_t c = 0; c < x0.size(); ++c) {
    mx0.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<Eigen::VectorXd>(x0[c].data(), n);
  }
  Eigen::MatrixXd mx1(n, static_cast<Eigen::Index>(x1.size()));
  for (std::size_t c = 0; c < x1.size(); ++c) {
    mx1.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<Eigen::VectorXd>(x1[c].data(), n);
  }
  std::optional<Eigen::VectorXi> vs;
  if (col_s >= 0) vs = Eigen::Map<Eigen::VectorXi>(s.data(), n);

  return validate_dataset(std::move(vy2), std::move(vd1), std::move(vd2),
                          std::move(mx0), std::move(mx1), std::move(vs),
                          std::move(x0_names), std::move(x1_names));
}

// Writes a dataset back out under the same contract (used by the simulation
// harness and tests to produce CLI inputs).
inline void write_dataset_csv(const PanelDataset& data,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("file_error", "cannot open output file: " + path);
  out << "y2,d1,d2";
  for (Eigen::Index j = 0; j < data.p0(); ++j) {
    out << ","
        << (j < static_cast<Eigen::Index>(data.x0_names.size())
                ? data.x0_names[j]
                : "x0_" + std::to_string(j + 1));
  }
  for (Eigen::Index j = 0; j < data.p1(); ++j) {
    out << ","
        << (j < static_cast<Eigen::Index>(data.x1_names.size())
                ? data.x1_names[j]
                : "x1_" + std::to_string(j + 1));
  }
  if (data.s) out << ",s";
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << fmt17(data.y2[i]) << "," << data.d1[i] << "," << data.d2[i];
    for (Eigen::Index j = 0; j < data.p0(); ++j) {
      out << "," << fmt17(data.x0(i, j));
    }
    for (Eigen::Index j = 0; j < data.p1(); ++j) {
      out << "," << fmt17(data.x1(i, j));
    }
    if (data.s) out << "," << (*data.s)[i];
    out << "\n";
  }
  if (!out) throw Error("file_error", "failed writing " + path);
}

}  // namespace seqdml
