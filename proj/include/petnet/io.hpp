#ifndef PETNET_IO_HPP
#define PETNET_IO_HPP

#include "petnet/graph.hpp"
#include "petnet/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace petnet {

/// Signals CSV: rows are nodes, columns subjects. An optional header row
/// carries subject ids; an optional leading non-numeric column carries node
/// ids.
SignalMatrix load_signals(const std::filesystem::path& path);

/// Signals plus a `subject_id,label` CSV. Labels map to class indices in
/// first-appearance order unless `known_classes` fixes the mapping.
Dataset load_dataset(const std::filesystem::path& signals_path,
                     const std::filesystem::path& labels_path,
                     const std::optional<std::vector<std::string>>& known_classes = std::nullopt);

void write_signals(const SignalMatrix& s, const std::filesystem::path& path);
void write_dataset(const Dataset& ds, const std::filesystem::path& signals_path,
                   const std::filesystem::path& labels_path);

/// `src,dst,weight` with 0-based nodes and src < dst.
void write_edge_list(const SparseGraph& g, const std::filesystem::path& path);
/// Node count defaults to the largest index + 1.
SparseGraph read_edge_list(const std::filesystem::path& path,
                           std::optional<std::size_t> n_nodes = std::nullopt);
void write_dense_adjacency(const SparseGraph& g, const std::filesystem::path& path);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace petnet

#endif
