#include "latrank/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "latrank/errors.hpp"

namespace latrank {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  // %.17g always round-trips; prefer the shorter form when it does too
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

double parse_number(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " +
                     what + " from '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " +
                     what + " from '" + s + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

EventDataset parse_events(std::istream& in, const ParseSchema& schema,
                          DatasetOptions options) {
  std::string line;
  int line_no = 0;

  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::string body = trim(t.substr(1));
      std::size_t eq = body.find('=');
      if (eq != std::string::npos) {
        meta[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      }
      continue;
    }
    header = split(t, schema.delimiter);
    break;
  }
  if (header.empty()) {
    throw InputError("missing header row (expected columns " + schema.cohort +
                     "," + schema.day + "," + schema.time + "," + schema.winner +
                     "," + schema.loser + ")");
  }

  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError("line " + std::to_string(line_no) +
                       ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  std::size_t c_cohort = column(schema.cohort);
  std::size_t c_day = column(schema.day);
  std::size_t c_time = column(schema.time);
  std::size_t c_winner = column(schema.winner);
  std::size_t c_loser = column(schema.loser);

  std::vector<EventRecord> events;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') continue;
    std::vector<std::string> f = split(t, schema.delimiter);
    if (f.size() != header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(f.size()));
    }
    EventRecord e;
    e.cohort = f[c_cohort];
    e.day = parse_int(f[c_day], line_no, "day");
    e.time = parse_number(f[c_time], line_no, "time");
    int winner_id = parse_int(f[c_winner], line_no, "winner");
    int loser_id = parse_int(f[c_loser], line_no, "loser");
    if (winner_id < 1 || loser_id < 1) {
      throw InputError("line " + std::to_string(line_no) +
                       ": node ids are 1-based, got " +
                       std::to_string(winner_id) + " and " +
                       std::to_string(loser_id));
    }
    if (winner_id == loser_id) {
      throw InputError("line " + std::to_string(line_no) +
                       ": winner equals loser (id " + std::to_string(winner_id) +
                       ")");
    }
    e.winner = winner_id - 1;
    e.loser = loser_id - 1;
    events.push_back(std::move(e));
  }

  if (options.n_nodes == 0 && meta.count("n_nodes")) {
    options.n_nodes = parse_int(meta["n_nodes"], 0, "n_nodes metadata");
  }
  if (options.horizon == 0.0 && meta.count("horizon")) {
    options.horizon = parse_number(meta["horizon"], 0, "horizon metadata");
  }
  if (options.day_boundaries.empty() && meta.count("days")) {
    for (const auto& piece : split(meta["days"], ',')) {
      options.day_boundaries.push_back(
          parse_number(piece, 0, "days metadata"));
    }
  }
  if (options.cohort.empty() && meta.count("cohort")) {
    options.cohort = meta["cohort"];
  }

  return make_dataset(std::move(events), options);
}

EventDataset parse_events_file(const std::string& path,
                               const ParseSchema& schema,
                               DatasetOptions options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return parse_events(in, schema, std::move(options));
}

void write_events(const EventDataset& ds, std::ostream& out) {
  if (!ds.cohort.empty()) out << "# cohort=" << ds.cohort << "\n";
  out << "# n_nodes=" << ds.n_nodes << "\n";
  out << "# horizon=" << format_double(ds.horizon) << "\n";
  if (!ds.day_boundaries.empty()) {
    out << "# days=";
    for (std::size_t d = 0; d < ds.day_boundaries.size(); ++d) {
      if (d) out << ",";
      out << format_double(ds.day_boundaries[d]);
    }
    out << "\n";
  }
  out << "cohort,day,time,winner,loser\n";
  for (const auto& e : ds.events) {
    out << (e.cohort.empty() ? ds.cohort : e.cohort) << "," << e.day << ","
        << format_double(e.time) << "," << (e.winner + 1) << ","
        << (e.loser + 1) << "\n";
  }
}

void write_events_file(const EventDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_events(ds, out);
}

namespace {

template <typename Matrix, typename Format>
void write_matrix_impl(const Matrix& m, std::ostream& out, Format fmt) {
  if (m.rows() != m.cols()) throw InputError("matrix must be square");
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << "," << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << (i + 1);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << "," << fmt(m(i, j));
    out << "\n";
  }
}

}  // namespace

void write_matrix(const Eigen::MatrixXd& m, std::ostream& out) {
  write_matrix_impl(m, out, [](double v) { return format_double(v); });
}

void write_matrix(const Eigen::MatrixXi& m, std::ostream& out) {
  write_matrix_impl(m, out, [](int v) { return std::to_string(v); });
}

void write_matrix_file(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_matrix(m, out);
}

void write_matrix_file(const Eigen::MatrixXi& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_matrix(m, out);
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty matrix file");
  auto header = split(trim(line), ',');
  if (header.size() < 2) throw InputError("malformed matrix header");
  std::size_t n = header.size() - 1;
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw InputError("matrix has fewer rows than the header promises");
    }
    auto f = split(trim(line), ',');
    if (f.size() != n + 1) {
      throw InputError("matrix row " + std::to_string(i + 1) +
                       " has the wrong number of fields");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (f[j + 1] == "nan") {
        m(i, j) = std::nan("");
      } else {
        m(i, j) = parse_number(f[j + 1], static_cast<int>(i + 2), "matrix entry");
      }
    }
  }
  return m;
}

Eigen::MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return read_matrix(in);
}

void write_triples(const Eigen::MatrixXd& m, std::ostream& out,
                   const std::string& value_name) {
  out << "row,col," << value_name << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      out << (i + 1) << "," << (j + 1) << "," << format_double(m(i, j)) << "\n";
    }
  }
}

void write_triples_file(const Eigen::MatrixXd& m, const std::string& path,
                        const std::string& value_name) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_triples(m, out, value_name);
}

}  // namespace latrank
