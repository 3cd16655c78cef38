#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "simclf/corpus.hpp"

namespace simclf {

// Unit-norm function representation.
using Embedding = Eigen::VectorXd;

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  bool use_attention = true;
  bool use_projection_head = false;
  std::size_t head_dim = 128;
  std::size_t max_input_length = 512;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Shared layout of parameters and their gradients. Attention and head
// tensors are empty (0x0) when the corresponding block is disabled.
struct EncoderTensors {
  Eigen::MatrixXd embedding;    // vocab_size x embed_dim; row kPadId stays zero
  Eigen::MatrixXd query;        // embed_dim x embed_dim
  Eigen::MatrixXd key;          // embed_dim x embed_dim
  Eigen::MatrixXd value;        // embed_dim x embed_dim
  Eigen::MatrixXd head_weight;  // embed_dim x head_dim
  Eigen::MatrixXd head_bias;    // 1 x head_dim

  struct Named {
    std::string_view name;
    Eigen::MatrixXd* tensor;
  };
  struct ConstNamed {
    std::string_view name;
    const Eigen::MatrixXd* tensor;
  };
  // Declaration order; this is also the checkpoint order.
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;
};

struct EncoderParams : EncoderTensors {
  EncoderConfig config;

  bool has_attention() const { return query.size() != 0; }
  bool has_head() const { return head_weight.size() != 0; }
};

struct EncoderGradients : EncoderTensors {
  static EncoderGradients zeros_like(const EncoderParams& params);
  bool all_zero() const;
};

bool operator==(const EncoderParams& a, const EncoderParams& b);

// kTraining passes through the projection head when one is configured;
// kEvaluation returns the normalized pre-head representation.
enum class Stage { kTraining, kEvaluation };

EncoderParams init_params(const EncoderConfig& config);

Embedding encode(const EncoderParams& params, std::span<const TokenId> tokens,
                 Stage stage = Stage::kTraining);

std::vector<Embedding> encode_batch(const EncoderParams& params,
                                    const std::vector<std::vector<TokenId>>& batch,
                                    Stage stage = Stage::kTraining);

// Forward activations kept for a later backward pass.
class EncoderTape {
 public:
  struct Entry {
    std::vector<TokenId> ids;  // PAD stripped
    Eigen::MatrixXd x;
    Eigen::MatrixXd q, k, v, attn;
    Eigen::VectorXd pooled;
    double norm = 0.0;
    Embedding z;
  };

  std::size_t size() const { return entries_.size(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  friend std::vector<Embedding> encode_batch_recorded(const EncoderParams&,
                                                      const std::vector<std::vector<TokenId>>&,
                                                      EncoderTape&);
  std::vector<Entry> entries_;
};

// Training-stage encode that records activations into `tape`.
std::vector<Embedding> encode_batch_recorded(const EncoderParams& params,
                                             const std::vector<std::vector<TokenId>>& batch,
                                             EncoderTape& tape);

// Gradients of a scalar loss with respect to every parameter, given the loss
// gradient with respect to each training-stage output embedding.
EncoderGradients backward(const EncoderParams& params, const EncoderTape& tape,
                          const std::vector<Eigen::VectorXd>& upstream);
EncoderGradients backward(const EncoderParams& params,
                          const std::vector<std::vector<TokenId>>& batch,
                          const std::vector<Eigen::VectorXd>& upstream);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (little endian): "SCLF", u32 version, config block, u32
// tensor count, then per tensor u64 rows, u64 cols and row-major f64 data.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const EncoderParams& params);
EncoderParams deserialize_checkpoint(std::string_view bytes);

}  // namespace simclf
