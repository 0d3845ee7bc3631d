#include "petnet/io.hpp"

#include "petnet/error.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace petnet {

namespace {

namespace fs = std::filesystem;

struct CsvRow {
  std::size_t line;  // 1-based
  std::vector<std::string> cells;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<CsvRow> read_csv(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    CsvRow row{lineno, {}};
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') row.cells.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string where(const fs::path& path, std::size_t line, std::size_t column) {
  return path.filename().string() + " line " + std::to_string(line) + ", column " +
         std::to_string(column);
}

double numeric_cell(const fs::path& path, const CsvRow& row, std::size_t col) {
  const auto v = parse_number(row.cells[col]);
  require(v.has_value(), ErrorKind::Validation,
          "non-numeric cell '" + row.cells[col] + "' at " + where(path, row.line, col + 1));
  require(std::isfinite(*v), ErrorKind::Validation,
          "non-finite value '" + row.cells[col] + "' at " + where(path, row.line, col + 1));
  return *v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

SignalMatrix read_signals(const fs::path& path, bool& has_subject_ids) {
  auto rows = read_csv(path);
  require(!rows.empty(), ErrorKind::Validation, path.string() + " is empty");

  std::optional<CsvRow> header;
  {
    const auto& first = rows.front().cells;
    bool all_numeric_tail = true;
    for (std::size_t c = 1; c < first.size(); ++c) all_numeric_tail &= parse_number(first[c]).has_value();
    if (!all_numeric_tail || first.size() == 1) {
      header = rows.front();
      rows.erase(rows.begin());
    }
  }
  require(!rows.empty(), ErrorKind::Validation, path.string() + " has no data rows");

  const bool labelled = !parse_number(rows.front().cells.front()).has_value();
  const std::size_t width = rows.front().cells.size();
  const std::size_t offset = labelled ? 1 : 0;
  require(width > offset, ErrorKind::Validation, path.string() + " has no signal columns");
  const std::size_t n_subjects = width - offset;

  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_subjects));
  std::vector<std::string> node_ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require(row.cells.size() == width, ErrorKind::Dimension,
            path.filename().string() + " line " + std::to_string(row.line) + " has " +
                std::to_string(row.cells.size()) + " cells, expected " + std::to_string(width));
    node_ids.push_back(labelled ? row.cells[0] : "n" + std::to_string(r));
    for (std::size_t c = 0; c < n_subjects; ++c)
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          numeric_cell(path, row, c + offset);
  }

  std::vector<std::string> subject_ids;
  if (header) {
    const auto& cells = header->cells;
    require(cells.size() == width || cells.size() == n_subjects, ErrorKind::Dimension,
            "header of " + path.filename().string() + " has " + std::to_string(cells.size()) +
                " cells but rows have " + std::to_string(width));
    subject_ids.assign(cells.end() - static_cast<std::ptrdiff_t>(n_subjects), cells.end());
    std::map<std::string, std::size_t> seen;
    for (std::size_t c = 0; c < subject_ids.size(); ++c)
      require(seen.emplace(subject_ids[c], c).second, ErrorKind::Validation,
              "duplicate subject_id '" + subject_ids[c] + "' in header of " +
                  path.filename().string());
  } else {
    for (std::size_t c = 0; c < n_subjects; ++c) subject_ids.push_back("s" + std::to_string(c));
  }
  has_subject_ids = header.has_value();
  return SignalMatrix(std::move(values), std::move(node_ids), std::move(subject_ids));
}

}  // namespace

SignalMatrix load_signals(const fs::path& path) {
  bool has_ids = false;
  return read_signals(path, has_ids);
}

Dataset load_dataset(const fs::path& signals_path, const fs::path& labels_path,
                     const std::optional<std::vector<std::string>>& known_classes) {
  Dataset ds;
  bool signals_have_ids = false;
  ds.signals = read_signals(signals_path, signals_have_ids);

  auto rows = read_csv(labels_path);
  require(!rows.empty() && rows.front().cells.size() == 2 &&
              rows.front().cells[0] == "subject_id" && rows.front().cells[1] == "label",
          ErrorKind::Validation,
          labels_path.filename().string() + " must start with the header 'subject_id,label'");
  rows.erase(rows.begin());

  require(rows.size() == ds.n_subjects(), ErrorKind::Dimension,
          "signals have " + std::to_string(ds.n_subjects()) + " subjects but " +
              labels_path.filename().string() + " has " + std::to_string(rows.size()) +
              " labels");

  std::map<std::string, int> class_index;
  if (known_classes) {
    ds.class_names = *known_classes;
    for (std::size_t c = 0; c < known_classes->size(); ++c)
      class_index[(*known_classes)[c]] = static_cast<int>(c);
  }
  std::map<std::string, int> label_of;
  std::vector<std::string> order;
  for (const auto& row : rows) {
    require(row.cells.size() == 2, ErrorKind::Validation,
            labels_path.filename().string() + " line " + std::to_string(row.line) +
                " must have exactly 2 cells");
    const auto& id = row.cells[0];
    const auto& name = row.cells[1];
    require(!id.empty(), ErrorKind::Validation, "empty subject id at " + where(labels_path, row.line, 1));
    auto it = class_index.find(name);
    if (it == class_index.end()) {
      require(!known_classes, ErrorKind::Validation,
              "unknown label '" + name + "' at " + where(labels_path, row.line, 2));
      it = class_index.emplace(name, static_cast<int>(ds.class_names.size())).first;
      ds.class_names.push_back(name);
    }
    require(label_of.emplace(id, it->second).second, ErrorKind::Validation,
            "duplicate subject_id '" + id + "' at " + where(labels_path, row.line, 1));
    order.push_back(id);
  }

  if (!signals_have_ids) ds.signals.subject_ids = order;
  for (const auto& id : ds.signals.subject_ids) {
    const auto it = label_of.find(id);
    require(it != label_of.end(), ErrorKind::Validation,
            "subject '" + id + "' from " + signals_path.filename().string() + " has no label");
    ds.labels.push_back(it->second);
  }
  ds.validate(!known_classes);
  return ds;
}

void write_signals(const SignalMatrix& s, const fs::path& path) {
  auto out = open_out(path);
  out << "node";
  for (const auto& id : s.subject_ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    out << s.node_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) out << ',' << format_double(s.values(r, c));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

void write_dataset(const Dataset& ds, const fs::path& signals_path, const fs::path& labels_path) {
  write_signals(ds.signals, signals_path);
  auto out = open_out(labels_path);
  out << "subject_id,label\n";
  for (std::size_t s = 0; s < ds.n_subjects(); ++s)
    out << ds.signals.subject_ids[s] << ',' << ds.class_names.at(static_cast<std::size_t>(ds.labels[s]))
        << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + labels_path.string());
}

void write_edge_list(const SparseGraph& g, const fs::path& path) {
  auto out = open_out(path);
  out << "src,dst,weight\n";
  for (const auto& e : g.edges()) out << e.src << ',' << e.dst << ',' << format_double(e.weight) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

SparseGraph read_edge_list(const fs::path& path, std::optional<std::size_t> n_nodes) {
  auto rows = read_csv(path);
  require(!rows.empty() && rows.front().cells == std::vector<std::string>{"src", "dst", "weight"},
          ErrorKind::Validation, path.filename().string() + " must start with 'src,dst,weight'");
  std::vector<Edge> edges;
  std::size_t max_node = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require(row.cells.size() == 3, ErrorKind::Validation,
            path.filename().string() + " line " + std::to_string(row.line) + " must have 3 cells");
    const double a = numeric_cell(path, row, 0), b = numeric_cell(path, row, 1);
    require(a >= 0 && b >= 0 && a == std::floor(a) && b == std::floor(b), ErrorKind::Validation,
            "node ids must be nonnegative integers at " + where(path, row.line, 1));
    const auto src = static_cast<std::size_t>(a), dst = static_cast<std::size_t>(b);
    edges.push_back({src, dst, numeric_cell(path, row, 2)});
    max_node = std::max({max_node, src + 1, dst + 1});
  }
  return SparseGraph(n_nodes.value_or(max_node), std::move(edges));
}

void write_dense_adjacency(const SparseGraph& g, const fs::path& path) {
  auto out = open_out(path);
  const auto a = g.dense_adjacency();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) out << (c ? "," : "") << format_double(a(r, c));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const fs::path& path) {
  auto out = open_out(path);
  out << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& p : curve) {
    out << p.epoch << ',' << format_double(p.train_loss) << ',' << format_double(p.train_acc) << ',';
    if (std::isfinite(p.val_acc)) out << format_double(p.val_acc);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, ErrorKind::Runtime,
          "sha256 unavailable");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 0xf];
  }
  return s;
}

}  // namespace petnet
