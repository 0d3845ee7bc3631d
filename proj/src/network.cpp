#include "petnet/network.hpp"

#include "petnet/error.hpp"

#include <algorithm>
#include <cmath>

namespace petnet {

namespace {

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

// (N x B*F) node-major storage viewed as (N*B x F): row i*B + b is node i of
// sample b.
ConstMatrixMap per_node_rows(const double* data, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatrixMap(data, rows, cols);
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

int in_channels(const NetworkConfig& cfg, std::size_t layer) {
  return layer == 0 ? 1 : cfg.conv_channels[layer - 1];
}

void check_batch(const ChebNetModel& m, const Matrix& x_batch) {
  require(static_cast<std::size_t>(x_batch.cols()) == m.input_nodes(), ErrorKind::Dimension,
          "batch has " + std::to_string(x_batch.cols()) + " nodes per sample, model expects " +
              std::to_string(m.input_nodes()));
  require(x_batch.rows() > 0, ErrorKind::Dimension, "empty batch");
}

Matrix input_layout(const ChebNetModel& m, const Matrix& x_batch) {
  const auto& perm = m.hierarchy.perm;
  const Eigen::Index batch = x_batch.rows();
  Matrix x0 = Matrix::Zero(idx(perm.size()), batch);
  for (std::size_t p = 0; p < perm.size(); ++p)
    if (perm[p] < m.hierarchy.original_size)
      x0.row(idx(p)) = x_batch.col(idx(perm[p])).transpose();
  return x0;
}

void chebyshev_basis(const SparseMatrix& lap, const Matrix& x, int order, Matrix& basis) {
  const Eigen::Index n = x.rows();
  basis.resize(n * order, x.cols());
  basis.topRows(n) = x;
  if (order > 1) basis.middleRows(n, n).noalias() = lap * x;
  for (int k = 2; k < order; ++k) {
    auto cur = basis.middleRows(k * n, n);
    cur.noalias() = lap * basis.middleRows((k - 1) * n, n);
    cur = 2.0 * cur - basis.middleRows((k - 2) * n, n);
  }
}

struct LayerOutput {
  Matrix pre;
  Matrix pooled;
  std::vector<Eigen::Index> argmax;
};

// One conv + bias + rectifier + pool/2 stage on node-major input.
void conv_layer(const ChebNetModel& m, std::size_t layer, const Matrix& x, Eigen::Index batch,
                Matrix& basis, LayerOutput& out, bool keep_argmax) {
  const auto& cfg = m.config;
  const Eigen::Index n = x.rows();
  const Eigen::Index f_in = in_channels(cfg, layer);
  const Eigen::Index f_out = cfg.conv_channels[layer];
  const auto& theta = m.params.conv_theta[layer];

  chebyshev_basis(m.laplacians[layer].entries, x, cfg.K, basis);

  out.pre.resize(n, batch * f_out);
  MatrixMap y(out.pre.data(), n * batch, f_out);
  y.setZero();
  for (int k = 0; k < cfg.K; ++k) {
    const auto tk = per_node_rows(basis.data() + k * n * batch * f_in, n * batch, f_in);
    y.noalias() += tk * theta.middleRows(k * f_in, f_in);
  }
  y.rowwise() += m.params.conv_bias[layer];

  const Matrix rectified = out.pre.cwiseMax(0.0);
  out.pooled = pool(rectified, 2, keep_argmax ? &out.argmax : nullptr);
}

Matrix flatten(const Matrix& top, Eigen::Index batch, Eigen::Index channels) {
  const Eigen::Index nodes = top.rows();
  Matrix flat(batch, nodes * channels);
  for (Eigen::Index i = 0; i < nodes; ++i)
    for (Eigen::Index b = 0; b < batch; ++b)
      flat.block(b, i * channels, 1, channels) = top.block(i, b * channels, 1, channels);
  return flat;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    probs.row(r) = (logits.row(r).array() - top).exp();
    probs.row(r) /= probs.row(r).sum();
  }
  return probs;
}

void glorot(Matrix& w, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
}

}  // namespace

void NetworkConfig::validate() const {
  require(K >= 1, ErrorKind::Config, "K must be at least 1");
  for (int c : conv_channels) require(c >= 1, ErrorKind::Config, "conv channels must be positive");
  require(fc_width >= 1, ErrorKind::Config, "fc width must be positive");
  require(n_classes >= 2, ErrorKind::Config, "need at least 2 classes");
  require(dropout_keep > 0.0 && dropout_keep <= 1.0, ErrorKind::Config,
          "dropout keep probability must lie in (0, 1]");
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    z.conv_theta[l] = Matrix::Zero(conv_theta[l].rows(), conv_theta[l].cols());
    z.conv_bias[l] = RowVector::Zero(conv_bias[l].cols());
  }
  z.fc1_weight = Matrix::Zero(fc1_weight.rows(), fc1_weight.cols());
  z.fc1_bias = RowVector::Zero(fc1_bias.cols());
  z.fc2_weight = Matrix::Zero(fc2_weight.rows(), fc2_weight.cols());
  z.fc2_bias = RowVector::Zero(fc2_bias.cols());
  return z;
}

std::size_t Parameters::count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < kConvLayers; ++l)
    total += static_cast<std::size_t>(conv_theta[l].size() + conv_bias[l].size());
  total += static_cast<std::size_t>(fc1_weight.size() + fc1_bias.size());
  total += static_cast<std::size_t>(fc2_weight.size() + fc2_bias.size());
  return total;
}

template <class P, class T>
std::vector<BasicTensorView<T>> collect_tensors(P& p) {
  auto view = [](auto& t) { return std::span<T>(t.data(), static_cast<std::size_t>(t.size())); };
  std::vector<BasicTensorView<T>> out;
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    out.push_back({"conv" + std::to_string(l) + ".theta", view(p.conv_theta[l]), false});
    out.push_back({"conv" + std::to_string(l) + ".bias", view(p.conv_bias[l]), true});
  }
  out.push_back({"fc1.weight", view(p.fc1_weight), false});
  out.push_back({"fc1.bias", view(p.fc1_bias), true});
  out.push_back({"fc2.weight", view(p.fc2_weight), false});
  out.push_back({"fc2.bias", view(p.fc2_bias), true});
  return out;
}

std::vector<TensorView> tensors(Parameters& p) { return collect_tensors<Parameters, double>(p); }

std::vector<ConstTensorView> tensors(const Parameters& p) {
  return collect_tensors<const Parameters, const double>(p);
}

std::array<LaplacianOp, kConvLayers> level_laplacians(const CoarseningHierarchy& h,
                                                      LaplacianKind kind) {
  require(h.depth() >= kConvLayers, ErrorKind::Config,
          "network needs a hierarchy with at least 3 levels, got " + std::to_string(h.depth()));
  std::array<LaplacianOp, kConvLayers> out;
  for (std::size_t l = 0; l < kConvLayers; ++l) out[l] = rescaled_laplacian(h.levels[l], kind);
  return out;
}

ChebNetModel init_model(const NetworkConfig& cfg, const CoarseningHierarchy& h) {
  cfg.validate();
  ChebNetModel m;
  m.config = cfg;
  m.hierarchy = h;
  m.laplacians = level_laplacians(h, cfg.laplacian_kind);

  std::mt19937_64 rng(cfg.seed);
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    const int f_in = in_channels(cfg, l);
    const int f_out = cfg.conv_channels[l];
    m.params.conv_theta[l].resize(cfg.K * f_in, f_out);
    glorot(m.params.conv_theta[l], cfg.K * f_in, f_out, rng);
    m.params.conv_bias[l] = RowVector::Zero(f_out);
  }
  const auto flat = static_cast<Eigen::Index>(h.level_size(kConvLayers)) * cfg.conv_channels.back();
  m.params.fc1_weight.resize(flat, cfg.fc_width);
  glorot(m.params.fc1_weight, static_cast<double>(flat), cfg.fc_width, rng);
  m.params.fc1_bias = RowVector::Zero(cfg.fc_width);
  m.params.fc2_weight.resize(cfg.fc_width, cfg.n_classes);
  glorot(m.params.fc2_weight, cfg.fc_width, cfg.n_classes, rng);
  m.params.fc2_bias = RowVector::Zero(cfg.n_classes);
  return m;
}

ForwardResult forward(const ChebNetModel& m, const Matrix& x_batch, bool train_mode,
                      std::mt19937_64* rng) {
  check_batch(m, x_batch);
  const auto& cfg = m.config;
  const Eigen::Index batch = x_batch.rows();
  require(!train_mode || cfg.dropout_keep == 1.0 || rng != nullptr, ErrorKind::Contract,
          "train-mode forward needs a random stream for dropout");

  ForwardCache cache;
  cache.batch = static_cast<std::size_t>(batch);
  cache.revision = m.revision;

  Matrix x = input_layout(m, x_batch);
  Matrix scratch;
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    LayerOutput out;
    Matrix& basis = train_mode ? cache.basis[l] : scratch;
    conv_layer(m, l, x, batch, basis, out, train_mode);
    x = std::move(out.pooled);
    if (train_mode) {
      cache.pre[l] = std::move(out.pre);
      cache.pool_argmax[l] = std::move(out.argmax);
    }
  }

  Matrix flat = flatten(x, batch, cfg.conv_channels.back());
  Matrix fc1_pre = flat * m.params.fc1_weight;
  fc1_pre.rowwise() += m.params.fc1_bias;
  Matrix fc1_out = fc1_pre.cwiseMax(0.0);

  if (train_mode) {
    cache.dropout_mask = Matrix::Constant(batch, cfg.fc_width, 1.0);
    if (cfg.dropout_keep < 1.0) {
      std::bernoulli_distribution keep(cfg.dropout_keep);
      for (Eigen::Index k = 0; k < cache.dropout_mask.size(); ++k)
        cache.dropout_mask.data()[k] = keep(*rng) ? 1.0 / cfg.dropout_keep : 0.0;
    }
    fc1_out = fc1_out.cwiseProduct(cache.dropout_mask);
  }

  Matrix logits = fc1_out * m.params.fc2_weight;
  logits.rowwise() += m.params.fc2_bias;

  ForwardResult result;
  result.probs = softmax_rows(logits);
  if (train_mode) {
    cache.flat = std::move(flat);
    cache.fc1_pre = std::move(fc1_pre);
    cache.fc1_out = std::move(fc1_out);
    cache.probs = result.probs;
    result.cache = std::move(cache);
  }
  return result;
}

Matrix conv_stack(const ChebNetModel& m, const Matrix& x_batch) {
  check_batch(m, x_batch);
  Matrix x = input_layout(m, x_batch);
  Matrix basis;
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    LayerOutput out;
    conv_layer(m, l, x, x_batch.rows(), basis, out, false);
    x = std::move(out.pooled);
  }
  return x;
}

Parameters backward(const ChebNetModel& m, const ForwardCache& cache,
                    std::span<const int> labels) {
  require(cache.batch > 0 && cache.probs.rows() == idx(cache.batch), ErrorKind::Contract,
          "backward needs a cache from a train-mode forward pass");
  require(cache.revision == m.revision, ErrorKind::Contract,
          "forward cache is stale: parameters changed since it was built");
  require(labels.size() == cache.batch, ErrorKind::Dimension,
          "got " + std::to_string(labels.size()) + " labels for a batch of " +
              std::to_string(cache.batch));

  const auto& cfg = m.config;
  const auto& p = m.params;
  const Eigen::Index batch = idx(cache.batch);
  Parameters g = p.zeros_like();

  Matrix d_logits = cache.probs;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    require(y >= 0 && y < cfg.n_classes, ErrorKind::Validation,
            "label " + std::to_string(y) + " out of range");
    d_logits(b, y) -= 1.0;
  }
  d_logits /= static_cast<double>(batch);

  g.fc2_weight.noalias() = cache.fc1_out.transpose() * d_logits;
  g.fc2_bias = d_logits.colwise().sum();
  Matrix d_hidden = d_logits * p.fc2_weight.transpose();
  d_hidden = d_hidden.cwiseProduct(cache.dropout_mask);
  for (Eigen::Index k = 0; k < d_hidden.size(); ++k)
    if (cache.fc1_pre.data()[k] <= 0.0) d_hidden.data()[k] = 0.0;
  g.fc1_weight.noalias() = cache.flat.transpose() * d_hidden;
  g.fc1_bias = d_hidden.colwise().sum();
  const Matrix d_flat = d_hidden * p.fc1_weight.transpose();

  // Un-flatten into node-major layout.
  const Eigen::Index top_channels = cfg.conv_channels.back();
  const Eigen::Index top_nodes = d_flat.cols() / top_channels;
  Matrix d_x(top_nodes, batch * top_channels);
  for (Eigen::Index i = 0; i < top_nodes; ++i)
    for (Eigen::Index b = 0; b < batch; ++b)
      d_x.block(i, b * top_channels, 1, top_channels) = d_flat.block(b, i * top_channels, 1, top_channels);

  for (std::size_t l = kConvLayers; l-- > 0;) {
    const Matrix& pre = cache.pre[l];
    const Eigen::Index n = pre.rows();
    const Eigen::Index f_in = in_channels(cfg, l);
    const Eigen::Index f_out = cfg.conv_channels[l];
    const int order = cfg.K;

    // Unpool through the recorded argmax, then the rectifier.
    Matrix d_pre = Matrix::Zero(n, pre.cols());
    const auto& arg = cache.pool_argmax[l];
    for (Eigen::Index r = 0; r < d_x.rows(); ++r)
      for (Eigen::Index c = 0; c < d_x.cols(); ++c) {
        const auto src = arg[static_cast<std::size_t>(r * d_x.cols() + c)];
        if (pre(src, c) > 0.0) d_pre(src, c) += d_x(r, c);
      }

    const auto dy = per_node_rows(d_pre.data(), n * batch, f_out);
    g.conv_bias[l] = dy.colwise().sum();
    const Matrix& basis = cache.basis[l];
    for (int k = 0; k < order; ++k) {
      const auto tk = per_node_rows(basis.data() + k * n * batch * f_in, n * batch, f_in);
      g.conv_theta[l].middleRows(k * f_in, f_in).noalias() = tk.transpose() * dy;
    }
    if (l == 0) break;

    // Adjoint of the three-term recursion; the rescaled Laplacian is symmetric.
    Matrix d_basis(n * order, batch * f_in);
    for (int k = 0; k < order; ++k) {
      MatrixMap gk(d_basis.data() + k * n * batch * f_in, n * batch, f_in);
      gk.noalias() = dy * p.conv_theta[l].middleRows(k * f_in, f_in).transpose();
    }
    const auto& lap = m.laplacians[l].entries;
    for (int k = order - 1; k >= 2; --k) {
      const Matrix spread = lap * d_basis.middleRows(k * n, n);
      d_basis.middleRows((k - 1) * n, n) += 2.0 * spread;
      d_basis.middleRows((k - 2) * n, n) -= d_basis.middleRows(k * n, n);
    }
    if (order >= 2) d_basis.topRows(n) += lap * d_basis.middleRows(n, n);
    d_x = d_basis.topRows(n);
  }
  return g;
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ChebNetModel& m, const Matrix& x_batch) {
  // Chunked so large sets do not materialize one huge Chebyshev basis.
  constexpr Eigen::Index kChunk = 64;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x_batch.rows()));
  for (Eigen::Index start = 0; start < x_batch.rows(); start += kChunk) {
    const auto rows = std::min(kChunk, x_batch.rows() - start);
    const auto part = argmax_rows(forward(m, x_batch.middleRows(start, rows), false).probs);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace petnet
