#include "dgpg/policy/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgpg::policy {

namespace {

constexpr double kHiddenGain = 1.0;
constexpr double kOutputGain = 0.01;

// rows x cols matrix with orthonormal rows (or columns when rows > cols),
// scaled by gain. Modified Gram-Schmidt on Gaussian vectors.
void orthogonal_fill(double* w, std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const bool by_rows = rows <= cols;
  const std::size_t n_vec = by_rows ? rows : cols;
  const std::size_t len = by_rows ? cols : rows;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  basis.reserve(n_vec);
  for (std::size_t v = 0; v < n_vec; ++v) {
    std::vector<double> x(len);
    double norm = 0.0;
    do {
      for (auto& e : x) e = normal(rng);
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += x[i] * b[i];
        for (std::size_t i = 0; i < len; ++i) x[i] -= dot * b[i];
      }
      norm = 0.0;
      for (double e : x) norm += e * e;
      norm = std::sqrt(norm);
    } while (norm < 1e-8);
    for (auto& e : x) e /= norm;
    basis.push_back(std::move(x));
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      w[r * cols + c] = gain * (by_rows ? basis[r][c] : basis[c][r]);
}

}  // namespace

Network::Network(const NetSpec& spec) : spec_(spec) {
  if (spec.out_dim == 0 || spec.suffix_dim == 0) throw std::invalid_argument("Network: empty layer");
  std::size_t off = 0;
  if (spec.arch == Arch::Linear) {
    w1_cols_ = spec.in_dim();
    w1_ = off;
    off += spec.out_dim * w1_cols_;
    b1_ = off;
    off += spec.out_dim;
  } else {
    if (spec.hidden == 0 || spec.embed == 0) throw std::invalid_argument("Network: Mlp needs hidden and embed sizes");
    w1_cols_ = spec.in_dim() + spec.embed;
    w1_ = off;
    off += spec.hidden * w1_cols_;
    b1_ = off;
    off += spec.hidden;
    w2_ = off;
    off += spec.hidden * spec.hidden;
    b2_ = off;
    off += spec.hidden;
    w3_ = off;
    off += spec.out_dim * spec.hidden;
    b3_ = off;
    off += spec.out_dim;
    emb_ = off;
    off += spec.n_ids() * spec.embed;
  }
  params_.assign(off, 0.0);
}

void Network::init(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  if (spec_.arch == Arch::Linear) return;
  const std::size_t h = spec_.hidden;
  orthogonal_fill(&params_[w1_], h, w1_cols_, kHiddenGain, rng);
  orthogonal_fill(&params_[w2_], h, h, kHiddenGain, rng);
  orthogonal_fill(&params_[w3_], spec_.out_dim, h, kOutputGain, rng);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(spec_.embed)));
  for (std::size_t i = 0; i < spec_.n_ids() * spec_.embed; ++i) params_[emb_ + i] = normal(rng);
}

std::size_t Network::decode_id(double feature) const noexcept {
  const double scaled = std::round(feature * static_cast<double>(spec_.id_scale));
  if (!(scaled > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(scaled), spec_.n_ids() - 1);
}

void Network::preact_prefix(const double* prefix, double* z) const {
  const std::size_t rows = spec_.first_dim();
  const std::size_t p = spec_.prefix_dim;
  const double* w = &params_[w1_];
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * w1_cols_;
    double s = params_[b1_ + r];
    for (std::size_t c = 0; c < p; ++c) s += wr[c] * prefix[c];
    z[r] = s;
  }
}

void Network::forward_suffix(const double* z_prefix, const double* suffix, Workspace& ws) const {
  const std::size_t rows = spec_.first_dim();
  const std::size_t p = spec_.prefix_dim;
  const std::size_t q = spec_.suffix_dim;
  ws.z1.resize(rows);
  const double* w = &params_[w1_];
  if (spec_.arch == Arch::Linear) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* wr = w + r * w1_cols_ + p;
      double s = z_prefix[r];
      for (std::size_t c = 0; c < q; ++c) s += wr[c] * suffix[c];
      ws.z1[r] = s;
    }
    ws.out.assign(ws.z1.begin(), ws.z1.end());
    return;
  }
  const std::size_t h = spec_.hidden;
  const std::size_t e = spec_.embed;
  ws.id = decode_id(suffix[q - 1]);
  const double* emb = &params_[emb_ + ws.id * e];
  ws.h1.resize(h);
  for (std::size_t r = 0; r < h; ++r) {
    const double* wr = w + r * w1_cols_ + p;
    double s = z_prefix[r];
    for (std::size_t c = 0; c < q; ++c) s += wr[c] * suffix[c];
    for (std::size_t c = 0; c < e; ++c) s += wr[q + c] * emb[c];
    ws.z1[r] = s;
    ws.h1[r] = std::tanh(s);
  }
  ws.h2.resize(h);
  const double* w2 = &params_[w2_];
  for (std::size_t r = 0; r < h; ++r) {
    const double* wr = w2 + r * h;
    double s = params_[b2_ + r];
    for (std::size_t c = 0; c < h; ++c) s += wr[c] * ws.h1[c];
    ws.h2[r] = std::tanh(s);
  }
  ws.out.resize(spec_.out_dim);
  const double* w3 = &params_[w3_];
  for (std::size_t r = 0; r < spec_.out_dim; ++r) {
    const double* wr = w3 + r * h;
    double s = params_[b3_ + r];
    for (std::size_t c = 0; c < h; ++c) s += wr[c] * ws.h2[c];
    ws.out[r] = s;
  }
}

void Network::backward_suffix(const double* suffix, Workspace& ws, const double* d_out, double* grad,
                              double* dz) const {
  const std::size_t p = spec_.prefix_dim;
  const std::size_t q = spec_.suffix_dim;
  if (spec_.arch == Arch::Linear) {
    for (std::size_t r = 0; r < spec_.out_dim; ++r) {
      dz[r] = d_out[r];
      double* gr = grad + w1_ + r * w1_cols_ + p;
      for (std::size_t c = 0; c < q; ++c) gr[c] += d_out[r] * suffix[c];
    }
    return;
  }
  const std::size_t h = spec_.hidden;
  const std::size_t e = spec_.embed;
  // output layer
  ws.d2.assign(h, 0.0);
  const double* w3 = &params_[w3_];
  for (std::size_t r = 0; r < spec_.out_dim; ++r) {
    const double g = d_out[r];
    if (g == 0.0) continue;
    grad[b3_ + r] += g;
    double* gr = grad + w3_ + r * h;
    const double* wr = w3 + r * h;
    for (std::size_t c = 0; c < h; ++c) {
      gr[c] += g * ws.h2[c];
      ws.d2[c] += g * wr[c];
    }
  }
  // second hidden layer
  ws.d1.assign(h, 0.0);
  const double* w2 = &params_[w2_];
  for (std::size_t r = 0; r < h; ++r) {
    const double g = ws.d2[r] * (1.0 - ws.h2[r] * ws.h2[r]);
    if (g == 0.0) continue;
    grad[b2_ + r] += g;
    double* gr = grad + w2_ + r * h;
    const double* wr = w2 + r * h;
    for (std::size_t c = 0; c < h; ++c) {
      gr[c] += g * ws.h1[c];
      ws.d1[c] += g * wr[c];
    }
  }
  // first layer, suffix and embedding columns
  const double* w = &params_[w1_];
  const double* emb = &params_[emb_ + ws.id * e];
  double* gemb = grad + emb_ + ws.id * e;
  for (std::size_t r = 0; r < h; ++r) {
    const double g = ws.d1[r] * (1.0 - ws.h1[r] * ws.h1[r]);
    dz[r] = g;
    if (g == 0.0) continue;
    double* gr = grad + w1_ + r * w1_cols_ + p;
    const double* wr = w + r * w1_cols_ + p;
    for (std::size_t c = 0; c < q; ++c) gr[c] += g * suffix[c];
    for (std::size_t c = 0; c < e; ++c) {
      gr[q + c] += g * emb[c];
      gemb[c] += g * wr[q + c];
    }
  }
}

void Network::backward_prefix(const double* prefix, const double* dz, double* grad) const {
  const std::size_t rows = spec_.first_dim();
  const std::size_t p = spec_.prefix_dim;
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dz[r];
    if (g == 0.0) continue;
    grad[b1_ + r] += g;
    double* gr = grad + w1_ + r * w1_cols_;
    for (std::size_t c = 0; c < p; ++c) gr[c] += g * prefix[c];
  }
}

void Network::forward(std::span<const double> input, Workspace& ws) const {
  if (input.size() != spec_.in_dim()) throw std::invalid_argument("Network::forward: input size mismatch");
  std::vector<double> z(spec_.first_dim());
  preact_prefix(input.data(), z.data());
  forward_suffix(z.data(), input.data() + spec_.prefix_dim, ws);
}

std::vector<double> Network::forward(std::span<const double> input) const {
  Workspace ws;
  forward(input, ws);
  return ws.out;
}

void Network::backward(std::span<const double> input, Workspace& ws, const double* d_out, double* grad) const {
  std::vector<double> dz(spec_.first_dim());
  backward_suffix(input.data() + spec_.prefix_dim, ws, d_out, grad, dz.data());
  backward_prefix(input.data(), dz.data(), grad);
}

}  // namespace dgpg::policy
