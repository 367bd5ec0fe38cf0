#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dgpg/common/rng.hpp"

namespace dgpg::policy {

enum class Arch { Linear, Mlp };

// Inputs are [prefix (prefix_dim) | suffix (suffix_dim)]. The last suffix
// entry is the normalized agent index; the Mlp decodes it back to an integer
// id for its embedding table.
struct NetSpec {
  Arch arch = Arch::Linear;
  std::size_t prefix_dim = 0;
  std::size_t suffix_dim = 4;
  std::size_t out_dim = 1;
  std::size_t hidden = 0;
  std::size_t embed = 0;
  std::size_t id_scale = 1;  // agent feature = id / id_scale

  std::size_t in_dim() const noexcept { return prefix_dim + suffix_dim; }
  std::size_t n_ids() const noexcept { return id_scale + 1; }
  // Width of the first affine map (logits for Linear, hidden units for Mlp).
  std::size_t first_dim() const noexcept { return arch == Arch::Linear ? out_dim : hidden; }

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

// Per-evaluation scratch.
struct Workspace {
  std::vector<double> z1, h1, h2, out;
  std::vector<double> d1, d2;  // backward scratch
  std::size_t id = 0;
};

// Affine (Linear) or two tanh hidden layers with an agent-id embedding
// concatenated to the input (Mlp). Parameters live in one flat vector.
//
// Evaluation is split so that the prefix contribution to the first layer is
// computed once for every agent sharing it:
//   preact_prefix(prefix) -> z, forward_suffix(z, suffix) -> out
// and, for gradients,
//   backward_suffix(...) -> dz, then backward_prefix(prefix, sum of dz).
class Network {
 public:
  Network() = default;
  explicit Network(const NetSpec& spec);

  const NetSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  // Zero for Linear. Orthogonal rows/columns scaled by `gain` for hidden
  // layers, 0.01 for the output layer, N(0, 1/embed) for the embedding.
  void init(Rng& rng);

  std::size_t decode_id(double feature) const noexcept;

  void preact_prefix(const double* prefix, double* z) const;
  void forward_suffix(const double* z_prefix, const double* suffix, Workspace& ws) const;
  // Accumulates into `grad` everything except the prefix columns of the first
  // layer and its bias; writes d loss / d z into `dz` (first_dim entries).
  void backward_suffix(const double* suffix, Workspace& ws, const double* d_out, double* grad,
                       double* dz) const;
  void backward_prefix(const double* prefix, const double* dz, double* grad) const;

  // Whole-input conveniences.
  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, Workspace& ws) const;
  void backward(std::span<const double> input, Workspace& ws, const double* d_out, double* grad) const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  // Offsets into params_.
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0, emb_ = 0;
  std::size_t w1_cols_ = 0;
  NetSpec spec_;
  std::vector<double> params_;
};

}  // namespace dgpg::policy
