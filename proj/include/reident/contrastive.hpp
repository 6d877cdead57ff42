/*
 * Copyright 2026 The reident Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef REIDENT_CONTRASTIVE_HPP_
#define REIDENT_CONTRASTIVE_HPP_

#include <span>
#include <vector>

#include <Eigen/Core>

namespace reident {

// Batch of row vectors (one embedding per row).
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Temperature {
 public:
  explicit Temperature(double tau);
  double value() const { return tau_; }

 private:
  double tau_;
};

// x.y / (|x| |y|). Throws on zero vectors or mismatched dimensions.
double cosine_similarity(std::span<const double> x, std::span<const double> y);

struct SimilarityMatrices {
  RowMatrix zz;     // zz(k, j) = s(z_k, z_j)
  RowMatrix zzhat;  // zzhat(k, j) = s(z_k, zhat_j)
};

SimilarityMatrices similarity_matrices(const RowMatrix& z, const RowMatrix& zhat);

// NT-Xent loss for anchors z with positives zhat (row k matches row k). For
// anchor k the denominator runs over every other anchor z_j (j != k) and over
// every zhat_j including the positive. The batch loss is the mean over
// anchors; with `symmetric` it is averaged with the mirrored loss that uses
// zhat as anchors.
double nt_xent_loss(const RowMatrix& z, const RowMatrix& zhat, Temperature tau,
                    bool symmetric = true);

// Per-anchor terms L(z_k, zhat_k) of the z-anchored direction.
std::vector<double> nt_xent_anchor_losses(const RowMatrix& z,
                                          const RowMatrix& zhat,
                                          Temperature tau);

struct LossAndGradient {
  double loss = 0.0;
  RowMatrix grad_z;
  RowMatrix grad_zhat;
};

// Loss plus its exact gradient with respect to the unnormalized rows.
LossAndGradient nt_xent_loss_and_gradient(const RowMatrix& z,
                                          const RowMatrix& zhat,
                                          Temperature tau,
                                          bool symmetric = true);

}  // namespace reident

#endif  // REIDENT_CONTRASTIVE_HPP_
