#include "tbs/cluster/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/parallel.hpp"
#include "tbs/pool/rollout.hpp"

namespace tbs::cluster {

CrossPlayMatrix crossplay_matrix(const pool::PartnerPool& pool, int episodes,
                                 std::uint64_t seed, int workers) {
  const std::size_t n = pool.size();
  if (n == 0) throw Error("cross-play needs a nonempty pool");
  CrossPlayMatrix out;
  out.X = Matrix::Zero(n, n);
  out.episodes = episodes;
  out.seed = seed;
  parallel_for(n * n, workers, [&](std::size_t idx) {
    const std::size_t a = idx / n;
    const std::size_t b = idx % n;
    out.X(a, b) = pool::rollout(pool[a].seat(0), pool[b].seat(1), pool.env,
                                episodes, derive_seed(seed, "crossplay", idx), false)
                      .mean_return;
  });
  return out;
}

SimilarityMatrix similarity_matrix(const Matrix& X) {
  if (X.rows() != X.cols()) throw Error("cross-play matrix must be square");
  const Eigen::Index n = X.rows();
  SimilarityMatrix out;
  out.S = Matrix::Zero(n, n);
  bool negative = false;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double num = X(a, b) + X(b, a);
      const double den = X(a, a) + X(b, b);
      double s;
      if (num == 0.0 && den == 0.0) {
        s = 1.0;
      } else if (den == 0.0) {
        s = num > 0.0 ? 1.0 : 0.0;
      } else {
        s = num / den;
      }
      if (X(a, b) < 0.0 || X(b, a) < 0.0 || X(a, a) < 0.0 || X(b, b) < 0.0) {
        negative = true;
      }
      if (!std::isfinite(s)) s = 0.0;
      s = std::clamp(s, 0.0, 1.0) + out.epsilon;
      out.S(a, b) = s;
      out.S(b, a) = s;
    }
  }
  if (negative) {
    out.warnings.push_back(
        "negative returns in the cross-play matrix; similarity ratios were clamped");
  }
  return out;
}

Matrix laplacian(const Matrix& S) {
  const Eigen::VectorXd degree = S.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw Error("similarity row with zero degree");
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  Matrix L = inv_sqrt.asDiagonal() * S * inv_sqrt.asDiagonal();
  // Keep exact symmetry despite rounding.
  return (L + L.transpose()) * 0.5;
}

Matrix top_eigenvectors(const Matrix& L, int k) {
  const Eigen::Index n = L.rows();
  if (k < 1 || k > n) throw Error("eigenvector count out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(L);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  Matrix out(n, k);
  for (int j = 0; j < k; ++j) out.col(j) = solver.eigenvectors().col(n - 1 - j);
  return out;
}

namespace {

// Index of the largest squared entry of each row; throws on all-zero rows.
std::vector<Eigen::Index> row_argmax_sq(const Matrix& Z) {
  std::vector<Eigen::Index> m(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    Eigen::Index best = 0;
    Z.row(i).array().square().maxCoeff(&best);
    if (Z(i, best) == 0.0) {
      throw Error("degenerate embedding: row " + std::to_string(i) + " is all zero");
    }
    m[i] = best;
  }
  return m;
}

double cost_of(const Matrix& Z) {
  const auto m = row_argmax_sq(Z);
  double J = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double mx = Z(i, m[i]) * Z(i, m[i]);
    J += Z.row(i).squaredNorm() / mx;
  }
  return J;
}

Matrix givens(int k, int p, int q, double theta) {
  Matrix G = Matrix::Identity(k, k);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  G(p, p) = c;
  G(p, q) = -s;
  G(q, p) = s;
  G(q, q) = c;
  return G;
}

std::vector<std::pair<int, int>> angle_pairs(int k) {
  std::vector<std::pair<int, int>> pairs;
  for (int p = 0; p < k; ++p) {
    for (int q = p + 1; q < k; ++q) pairs.emplace_back(p, q);
  }
  return pairs;
}

}  // namespace

double alignment_cost(const Matrix& X, const Matrix& R) {
  if (R.rows() != R.cols() || X.cols() != R.rows()) {
    throw Error("rotation shape does not match the embedding");
  }
  const Matrix I = Matrix::Identity(R.rows(), R.cols());
  if (((R.transpose() * R) - I).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error("rotation is not orthogonal");
  }
  return cost_of(X * R);
}

Matrix givens_rotation(const std::vector<double>& angles, int k) {
  const auto pairs = angle_pairs(k);
  if (angles.size() != pairs.size()) throw Error("wrong number of Givens angles");
  Matrix R = Matrix::Identity(k, k);
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    R = R * givens(k, pairs[l].first, pairs[l].second, angles[l]);
  }
  return R;
}

namespace {

// M <- M * G(p, q, theta), touching only columns p and q.
void rotate_columns(Matrix& M, int p, int q, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double a = M(i, p);
    const double b = M(i, q);
    M(i, p) = c * a + s * b;
    M(i, q) = -s * a + c * b;
  }
}

Matrix rotated(const Matrix& X, const std::vector<std::pair<int, int>>& pairs,
               const std::vector<double>& angles) {
  Matrix Z = X;
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    rotate_columns(Z, pairs[l].first, pairs[l].second, angles[l]);
  }
  return Z;
}

std::vector<double> gradient_impl(const Matrix& X,
                                  const std::vector<std::pair<int, int>>& pairs,
                                  const std::vector<double>& angles) {
  const std::size_t m = pairs.size();
  // U_l = X G_0 ... G_{l-1}; kept for every l.
  std::vector<Matrix> U(m + 1);
  U[0] = X;
  for (std::size_t l = 0; l < m; ++l) {
    U[l + 1] = U[l];
    rotate_columns(U[l + 1], pairs[l].first, pairs[l].second, angles[l]);
  }
  const Matrix& Z = U[m];
  const auto mi = row_argmax_sq(Z);
  Matrix W = Matrix::Zero(Z.rows(), Z.cols());  // dJ/dZ
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double zm = Z(i, mi[i]);
    const double zm2 = zm * zm;
    double rest = 0.0;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      if (j == mi[i]) continue;
      W(i, j) = 2.0 * Z(i, j) / zm2;
      rest += Z(i, j) * Z(i, j);
    }
    W(i, mi[i]) = -2.0 * rest / (zm2 * zm);
  }
  // dJ/dtheta_l = <W, U_l G'_l S_{l+1}> = <W S_{l+1}^T, U_l G'_l>, with
  // S_{l+1} = G_{l+1} ... G_{m-1}. W S_{l+1}^T is built right to left.
  std::vector<double> grad(m);
  for (std::size_t l = m; l-- > 0;) {
    const auto [p, q] = pairs[l];
    const double c = std::cos(angles[l]);
    const double s = std::sin(angles[l]);
    // U_l G'_l: column p = -s U_p + c U_q, column q = -c U_p - s U_q.
    const auto up = U[l].col(p);
    const auto uq = U[l].col(q);
    grad[l] = W.col(p).dot(-s * up + c * uq) + W.col(q).dot(-c * up - s * uq);
    // W <- W G_l^T, i.e. rotate by -theta.
    rotate_columns(W, p, q, -angles[l]);
  }
  return grad;
}

}  // namespace

std::vector<double> alignment_cost_gradient(const Matrix& X,
                                            const std::vector<double>& angles) {
  const auto pairs = angle_pairs(static_cast<int>(X.cols()));
  if (angles.size() != pairs.size()) throw Error("wrong number of Givens angles");
  return gradient_impl(X, pairs, angles);
}

RotationResult minimize_rotation(const Matrix& X, const RotationOptions& options) {
  const int k = static_cast<int>(X.cols());
  RotationResult best;
  best.cost = std::numeric_limits<double>::infinity();
  if (k < 2) {
    best.R = Matrix::Identity(k, k);
    best.cost = static_cast<double>(X.rows());
    best.converged = true;
    return best;
  }
  const int m = num_angles(k);
  const auto pairs = angle_pairs(k);
  Rng rng(derive_seed(options.seed, "rotation"));
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    std::vector<double> theta(m, 0.0);
    if (r > 0) {
      for (auto& t : theta) t = (2.0 * uniform01(rng) - 1.0) * std::numbers::pi;
    }
    // Gradient descent whose step starts at the learning rate, grows after
    // an accepted step and halves after a rejected one.
    double cost = cost_of(rotated(X, pairs, theta));
    double step = options.learning_rate;
    bool converged = false;
    for (int it = 0; it < options.iterations && step > 1e-14; ++it) {
      const auto g = gradient_impl(X, pairs, theta);
      std::vector<double> next_theta = theta;
      for (int l = 0; l < m; ++l) next_theta[l] -= step * g[l];
      const double next = cost_of(rotated(X, pairs, next_theta));
      if (next < cost) {
        const bool small = cost - next < options.tolerance;
        theta = std::move(next_theta);
        cost = next;
        step *= 1.2;
        if (small) {
          converged = true;
          break;
        }
      } else {
        step *= 0.5;
      }
    }
    if (step <= 1e-14) converged = true;
    const double run_cost = cost;
    const auto& run_best = theta;
    if (run_cost < best.cost) {
      best.cost = run_cost;
      best.angles = run_best;
      best.converged = converged;
    }
  }
  best.R = givens_rotation(best.angles, k);
  return best;
}

std::pair<int, int> default_k_range(int n) {
  if (n < 3) return {1, 1};
  return {2, std::min(8, n - 1)};
}

namespace {

std::vector<int> argmax_labels(const Matrix& Z) {
  std::vector<int> labels(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    Eigen::Index j = 0;
    Z.row(i).array().square().maxCoeff(&j);
    labels[i] = static_cast<int>(j);
  }
  return labels;
}

bool all_nonempty(const std::vector<int>& labels, int k) {
  std::vector<bool> seen(k, false);
  for (int l : labels) seen[l] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

// Relabels clusters in order of first appearance so output is canonical.
std::vector<int> canonical(const std::vector<int>& labels, int k) {
  std::vector<int> map(k, -1);
  int next = 0;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (map[labels[i]] < 0) map[labels[i]] = next++;
    out[i] = map[labels[i]];
  }
  return out;
}

}  // namespace

ClusterAssignment select_k(const Matrix& S, int k_min, int k_max,
                           const SelectOptions& options) {
  const int n = static_cast<int>(S.rows());
  if (S.rows() != S.cols()) throw Error("similarity matrix must be square");
  if (!(1 <= k_min && k_min <= k_max && k_max <= n)) {
    throw Error("k range must satisfy 1 <= k_min <= k_max <= n");
  }
  const Matrix L = laplacian(S);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(L);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd lambda = solver.eigenvalues().reverse();
  auto eigengap = [&](int k) { return k < n ? lambda(k - 1) - lambda(k) : lambda(k - 1); };
  struct Candidate {
    int k;
    RotationResult rot;
    std::vector<int> labels;
  };
  std::vector<Candidate> candidates;
  for (int k = k_min; k <= k_max; ++k) {
    Candidate c{k, {}, {}};
    if (k == 1) {
      c.rot.R = Matrix::Identity(1, 1);
      c.rot.cost = n;
      c.rot.converged = true;
      c.labels.assign(n, 0);
    } else {
      Matrix X(n, k);
      for (int j = 0; j < k; ++j) X.col(j) = solver.eigenvectors().col(n - 1 - j);
      c.rot = minimize_rotation(X, options.rotation);
      c.labels = argmax_labels(X * c.rot.R);
    }
    candidates.push_back(std::move(c));
  }
  ClusterAssignment out;
  for (const auto& c : candidates) out.cost_curve.emplace_back(c.k, c.rot.cost);
  out.eigenvalues.assign(lambda.data(), lambda.data() + lambda.size());
  // Among candidates with nonempty clusters, costs within the tie tolerance
  // of the best are tied; the largest eigengap wins, then the smallest k.
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (all_nonempty(candidates[i].labels, candidates[i].k)) valid.push_back(i);
  }
  if (!valid.empty()) {
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i : valid) best_cost = std::min(best_cost, candidates[i].rot.cost);
    std::vector<std::size_t> tied;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i : valid) {
      if (candidates[i].rot.cost <= best_cost + options.tie_tolerance * n) {
        tied.push_back(i);
        best_gap = std::max(best_gap, eigengap(candidates[i].k));
      }
    }
    constexpr double kGapNoise = 1e-9;
    std::size_t pick = tied.front();
    for (std::size_t i : tied) {
      if (eigengap(candidates[i].k) >= best_gap - kGapNoise &&
          (eigengap(candidates[pick].k) < best_gap - kGapNoise ||
           candidates[i].k < candidates[pick].k)) {
        pick = i;
      }
    }
    const auto& c = candidates[pick];
    out.k = c.k;
    out.labels = canonical(c.labels, c.k);
    out.rotation = c.rot.R;
    out.converged = c.rot.converged;
    return out;
  }
  // No candidate produced k nonempty clusters: one cluster.
  out.k = 1;
  out.labels.assign(n, 0);
  out.rotation = Matrix::Identity(1, 1);
  return out;
}

ClusterAssignment spectral_clustering(const Matrix& S, int k, std::uint64_t seed) {
  const int n = static_cast<int>(S.rows());
  if (k < 1 || k > n) throw Error("k must lie in [1, n]");
  ClusterAssignment out;
  out.k = k;
  out.rotation = Matrix::Identity(k, k);
  if (k == 1) {
    out.labels.assign(n, 0);
    return out;
  }
  Matrix Y = top_eigenvectors(laplacian(S), k);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    const double norm = Y.row(i).norm();
    if (norm > 0.0) Y.row(i) /= norm;
  }
  Rng rng(derive_seed(seed, "kmeans"));
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  for (int restart = 0; restart < 10; ++restart) {
    // k-means++ seeding
    Matrix C(k, k);
    C.row(0) = Y.row(uniform_int(rng, n));
    for (int c = 1; c < k; ++c) {
      Eigen::VectorXd d2(n);
      for (int i = 0; i < n; ++i) {
        d2(i) = (C.topRows(c).rowwise() - Y.row(i)).rowwise().squaredNorm().minCoeff();
      }
      const double total = d2.sum();
      int pick = uniform_int(rng, n);
      if (total > 0.0) {
        double u = uniform01(rng) * total;
        for (int i = 0; i < n; ++i) {
          u -= d2(i);
          if (u <= 0.0) {
            pick = i;
            break;
          }
        }
      }
      C.row(c) = Y.row(pick);
    }
    std::vector<int> labels(n, 0);
    double inertia = 0.0;
    for (int it = 0; it < 100; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (int i = 0; i < n; ++i) {
        Eigen::Index j = 0;
        inertia += (C.rowwise() - Y.row(i)).rowwise().squaredNorm().minCoeff(&j);
        if (labels[i] != static_cast<int>(j)) {
          labels[i] = static_cast<int>(j);
          changed = true;
        }
      }
      for (int c = 0; c < k; ++c) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(k);
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (labels[i] == c) {
            sum += Y.row(i);
            ++count;
          }
        }
        if (count > 0) C.row(c) = sum / count;
      }
      if (!changed && it > 0) break;
    }
    if (all_nonempty(labels, k) && inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  if (best_labels.empty()) throw Error("k-means could not fill " + std::to_string(k) + " clusters");
  out.labels = canonical(best_labels, k);
  return out;
}

std::vector<std::vector<int>> members(const ClusterAssignment& a) {
  std::vector<std::vector<int>> out(a.k);
  for (std::size_t i = 0; i < a.labels.size(); ++i) out[a.labels[i]].push_back(static_cast<int>(i));
  return out;
}

void write_matrix_csv(const std::string& path, const Matrix& M) {
  std::ostringstream out;
  out.precision(17);
  out << "index";
  for (Eigen::Index j = 0; j < M.cols(); ++j) out << ',' << j;
  out << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << ',' << M(i, j);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Matrix read_matrix_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  Matrix M(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(M.cols())) {
      throw Error("ragged matrix CSV: " + path);
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  }
  return M;
}

nlohmann::json to_json(const ClusterAssignment& a) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [k, c] : a.cost_curve) curve.push_back({{"k", k}, {"cost", c}});
  std::vector<std::vector<double>> R(a.rotation.rows(), std::vector<double>(a.rotation.cols()));
  for (Eigen::Index i = 0; i < a.rotation.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.rotation.cols(); ++j) R[i][j] = a.rotation(i, j);
  }
  return {{"k", a.k},
          {"labels", a.labels},
          {"cost_curve", curve},
          {"rotation", R},
          {"converged", a.converged}};
}

ClusterAssignment assignment_from_json(const nlohmann::json& j) {
  ClusterAssignment a;
  a.k = j.at("k").get<int>();
  a.labels = j.at("labels").get<std::vector<int>>();
  for (const auto& e : j.at("cost_curve")) {
    a.cost_curve.emplace_back(e.at("k").get<int>(), e.at("cost").get<double>());
  }
  const auto R = j.value("rotation", std::vector<std::vector<double>>{});
  a.rotation = Matrix::Zero(R.size(), R.empty() ? 0 : R[0].size());
  for (std::size_t r = 0; r < R.size(); ++r) {
    for (std::size_t c = 0; c < R[r].size(); ++c) a.rotation(r, c) = R[r][c];
  }
  a.converged = j.value("converged", true);
  for (int l : a.labels) {
    if (l < 0 || l >= a.k) throw Error("cluster label out of range");
  }
  return a;
}

}  // namespace tbs::cluster
