#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>

#include "latrank/data.hpp"

namespace latrank {

// shortest text that round-trips a double exactly
std::string format_double(double x);

struct ParseSchema {
  std::string cohort = "cohort";
  std::string day = "day";
  std::string time = "time";
  std::string winner = "winner";
  std::string loser = "loser";
  char delimiter = ',';
};

// Reads the delimited event format: optional `# key=value` metadata lines
// (n_nodes, horizon, days, cohort), one header row naming the columns, then
// one event per line with 1-based node ids.  Fields left at their defaults
// in `options` are filled from the metadata before validation.
EventDataset parse_events(std::istream& in, const ParseSchema& schema = {},
                          DatasetOptions options = {});
EventDataset parse_events_file(const std::string& path,
                               const ParseSchema& schema = {},
                               DatasetOptions options = {});

// Inverse of parse_events; emits the metadata lines so the round trip
// reproduces the dataset exactly.
void write_events(const EventDataset& ds, std::ostream& out);
void write_events_file(const EventDataset& ds, const std::string& path);

// Square matrix with 1-based node ids along the header row and first column.
void write_matrix(const Eigen::MatrixXd& m, std::ostream& out);
void write_matrix(const Eigen::MatrixXi& m, std::ostream& out);
void write_matrix_file(const Eigen::MatrixXd& m, const std::string& path);
void write_matrix_file(const Eigen::MatrixXi& m, const std::string& path);
Eigen::MatrixXd read_matrix(std::istream& in);
Eigen::MatrixXd read_matrix_file(const std::string& path);

// Off-diagonal entries as (row, col, value) triples with 1-based ids;
// non-finite entries are written as nan.
void write_triples(const Eigen::MatrixXd& m, std::ostream& out,
                   const std::string& value_name = "value");
void write_triples_file(const Eigen::MatrixXd& m, const std::string& path,
                        const std::string& value_name = "value");

}  // namespace latrank
