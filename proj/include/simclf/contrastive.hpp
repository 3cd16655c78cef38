#pragma once

#include <vector>

#include <Eigen/Dense>

#include "simclf/encoder.hpp"

namespace simclf {

// Pairwise similarities of a batch; entry (a, k) is sim(z_a, z_k).
using SimMatrix = Eigen::MatrixXd;

// a.b / (|a||b|). Throws InputError for zero vectors or mismatched sizes.
double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Softmax probability that `z` belongs to instance `i` of `batch` at
// temperature `tau`, using cosine similarity.
double instance_prob(std::size_t i, const Eigen::VectorXd& z,
                     const std::vector<Embedding>& batch, double tau);

// Gram matrix of the batch. Embeddings are expected to be unit norm, in which
// case this is the cosine similarity matrix.
SimMatrix similarity_matrix(const std::vector<Embedding>& embeddings);

struct NtXentResult {
  double loss = 0.0;
  SimMatrix similarities;
};

// Symmetric NT-Xent over 2N embeddings ordered as positive pairs (2i, 2i+1).
// Each anchor's denominator runs over the 2N-1 other batch members.
NtXentResult nt_xent_loss(const std::vector<Embedding>& embeddings, double tau);
double nt_xent_from_similarities(const SimMatrix& sims, double tau);

// dL/dS(a, k) treating each anchor row as independent variables; the
// diagonal is zero. Row a's negatives satisfy the hard-negative ratio
// G(a,m)/G(a,n) = exp((S(a,m) - S(a,n)) / tau).
Eigen::MatrixXd nt_xent_similarity_grad(const SimMatrix& sims, double tau);

// dL/dz_k with sim taken as the dot product, i.e. before the L2
// normalization Jacobian of the encoder.
std::vector<Eigen::VectorXd> nt_xent_grad(const std::vector<Embedding>& embeddings, double tau);

}  // namespace simclf
