#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tbs/pool/pool.hpp"

namespace tbs::cluster {

using Matrix = Eigen::MatrixXd;

// X(A, B) = mean sparse return of A's seat-1 policy with B's seat-2 policy.
struct CrossPlayMatrix {
  Matrix X;
  int episodes = 0;
  std::uint64_t seed = 0;
};

CrossPlayMatrix crossplay_matrix(const pool::PartnerPool& pool, int episodes,
                                 std::uint64_t seed, int workers = 1);

inline constexpr double kSimilarityEpsilon = 1e-4;

struct SimilarityMatrix {
  Matrix S;
  double epsilon = kSimilarityEpsilon;
  std::vector<std::string> warnings;
};

// s(A,B) = (X_AB + X_BA) / (X_AA + X_BB), clamped to [0, 1], 1 when both
// sides are 0, then shifted by epsilon.
SimilarityMatrix similarity_matrix(const Matrix& X);
inline SimilarityMatrix similarity_matrix(const CrossPlayMatrix& xp) {
  return similarity_matrix(xp.X);
}

// D^{-1/2} S D^{-1/2}.
Matrix laplacian(const Matrix& S);

// Eigenvectors of the k largest eigenvalues of a symmetric matrix, largest
// first, as the columns of an n x k matrix.
Matrix top_eigenvectors(const Matrix& L, int k);

// sum_i sum_j Z_ij^2 / max_j Z_ij^2 with Z = X R. Throws on an all-zero row.
double alignment_cost(const Matrix& X, const Matrix& R);

// Product of Givens rotations over index pairs (0,1), (0,2), ..., (k-2,k-1).
Matrix givens_rotation(const std::vector<double>& angles, int k);
inline int num_angles(int k) { return k * (k - 1) / 2; }

// Gradient of alignment_cost(X, givens_rotation(angles, k)) w.r.t. angles.
std::vector<double> alignment_cost_gradient(const Matrix& X,
                                            const std::vector<double>& angles);

struct RotationOptions {
  double learning_rate = 0.05;  // initial step
  int iterations = 500;
  int restarts = 8;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
};

struct RotationResult {
  Matrix R;
  double cost = 0.0;
  std::vector<double> angles;
  bool converged = false;
};

// Gradient descent over Givens angles with multiple starts. The first start
// is the identity rotation, the rest are uniform random angles.
RotationResult minimize_rotation(const Matrix& X, const RotationOptions& options = {});

struct ClusterAssignment {
  int k = 1;
  std::vector<int> labels;
  std::vector<std::pair<int, double>> cost_curve;  // (k, minimal cost)
  std::vector<double> eigenvalues;                 // Laplacian, descending
  Matrix rotation;
  bool converged = true;
};

struct SelectOptions {
  RotationOptions rotation;
  // Costs within tie_tolerance * n of the minimum count as tied. Ties go to
  // the largest eigengap lambda_k - lambda_{k+1} of the Laplacian, then to
  // the smallest k.
  double tie_tolerance = 1e-3;
};

// Default search range [2, min(8, n - 1)]; (1, 1) when n < 3.
std::pair<int, int> default_k_range(int n);

ClusterAssignment select_k(const Matrix& S, int k_min, int k_max,
                           const SelectOptions& options = {});
inline ClusterAssignment select_k(const SimilarityMatrix& S, int k_min, int k_max,
                                  const SelectOptions& options = {}) {
  return select_k(S.S, k_min, k_max, options);
}

// Spectral clustering at a fixed k: row-normalized top-k embedding followed
// by seeded k-means++ with restarts.
ClusterAssignment spectral_clustering(const Matrix& S, int k, std::uint64_t seed);

std::vector<std::vector<int>> members(const ClusterAssignment& a);

// CSV with a header row of indices; first column holds the row index.
void write_matrix_csv(const std::string& path, const Matrix& M);
Matrix read_matrix_csv(const std::string& path);

nlohmann::json to_json(const ClusterAssignment& a);
ClusterAssignment assignment_from_json(const nlohmann::json& j);

}  // namespace tbs::cluster
