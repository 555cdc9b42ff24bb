#include "cbwk/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cbwk {

void ClusteringConfig::validate() const {
    if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("clustering.delta must lie in (0, 1/2)");
    if (!(c0 > 0.0)) throw ValidationError("clustering.c0 must be positive");
    if (lambda1 && !(*lambda1 > 0.0)) throw ValidationError("clustering.lambda1 must be positive");
    if (!(c1 > 0.0)) throw ValidationError("clustering.c1 must be positive");
    if (max_iter <= 0) throw ValidationError("clustering.max_iter must be positive");
    if (!(tol > 0.0)) throw ValidationError("clustering.tol must be positive");
    if (!(match_tol > 0.0)) throw ValidationError("clustering.match_tol must be positive");
    if (kmeans_restarts <= 0) throw ValidationError("clustering.kmeans_restarts must be positive");
}

double ClusteringConfig::resolve_lambda1(std::size_t T0) const {
    return lambda1 ? *lambda1 : default_lambda1(std::max<std::size_t>(T0, 2), c1);
}

nlohmann::json ClusteringResult::to_json() const {
    auto rows = [](const Matrix& A) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(A.cols()));
            for (Eigen::Index j = 0; j < A.cols(); ++j) row[static_cast<std::size_t>(j)] = A(i, j);
            out.push_back(row);
        }
        return out;
    };
    return {{"subset", subset},
            {"per_arm_params", rows(per_arm_params)},
            {"centers", rows(centers)},
            {"labels", labels},
            {"objective_value", objective_value},
            {"iterations", iterations}};
}

// =============================================================================
// Subset sampling and lambda schedule
// =============================================================================

std::size_t subset_size(std::size_t K, double p_min, std::size_t C, std::size_t T, double delta, double c0) {
    if (!(p_min > 0.0)) throw ValidationError("subset_size: p_min must be positive");
    if (T == 0) throw ValidationError("subset_size: T must be at least 1");
    const double raw =
        c0 / p_min * (std::pow(static_cast<double>(T), delta) + std::log(static_cast<double>(C)));
    // Guard against values like 8.000000000001 rounding up to 9.
    const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::min(K, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> sample_arms(std::size_t K, std::size_t n, Rng& rng) {
    if (n > K) throw ValidationError("sample_arms: cannot draw more arms than exist");
    std::vector<std::size_t> arms(K);
    std::iota(arms.begin(), arms.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const auto span = static_cast<double>(K - i);
        const std::size_t j = i + std::min(static_cast<std::size_t>(uniform01(rng) * span), K - i - 1);
        std::swap(arms[i], arms[j]);
    }
    arms.resize(n);
    std::sort(arms.begin(), arms.end());
    return arms;
}

std::vector<std::size_t> sample_subset(std::size_t K, double p_min, std::size_t C, std::size_t T, double delta,
                                       double c0, Rng& rng) {
    return sample_arms(K, subset_size(K, p_min, C, T, delta, c0), rng);
}

double default_lambda1(std::size_t T0, double c1) {
    if (T0 < 2) throw ValidationError("default_lambda1: T0 must be at least 2");
    return c1 * std::pow(static_cast<double>(T0), -0.25);
}

// =============================================================================
// Objective and gradient
// =============================================================================

namespace {

void check_shapes(const Matrix& arms, const Matrix& centers, const std::vector<ArmSamples>& data) {
    if (static_cast<std::size_t>(arms.rows()) != data.size())
        throw ValidationError("classifier-Lasso: one parameter row per arm is required");
    if (arms.cols() != centers.cols()) throw ValidationError("classifier-Lasso: dimension mismatch");
    if (data.empty()) return;
    const Eigen::Index T0 = data.front().contexts.rows();
    for (const auto& arm : data) {
        if (arm.contexts.rows() != T0 || arm.rewards.size() != T0)
            throw ValidationError("classifier-Lasso: every arm needs the same number of observations");
        if (arm.contexts.cols() != arms.cols()) throw ValidationError("classifier-Lasso: dimension mismatch");
    }
}

double penalty_product(const Eigen::Ref<const Vector>& mu_a, const Matrix& centers) {
    double prod = 1.0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) prod *= (mu_a - centers.row(c).transpose()).norm();
    return prod;
}

}  // namespace

double classifier_lasso_objective(const Matrix& per_arm_params, const Matrix& centers,
                                  const std::vector<ArmSamples>& data, double lambda1) {
    check_shapes(per_arm_params, centers, data);
    if (data.empty()) return 0.0;
    const double N = static_cast<double>(data.size());
    const double T0 = static_cast<double>(data.front().contexts.rows());
    double fit = 0.0, pen = 0.0;
    for (std::size_t a = 0; a < data.size(); ++a) {
        const Vector mu = per_arm_params.row(static_cast<Eigen::Index>(a)).transpose();
        fit += 0.5 * (data[a].rewards - data[a].contexts * mu).squaredNorm();
        pen += penalty_product(mu, centers);
    }
    return fit / (N * T0) + lambda1 / N * pen;
}

ClassoGradient classifier_lasso_gradient(const Matrix& per_arm_params, const Matrix& centers,
                                         const std::vector<ArmSamples>& data, double lambda1) {
    check_shapes(per_arm_params, centers, data);
    ClassoGradient g{Matrix::Zero(per_arm_params.rows(), per_arm_params.cols()),
                     Matrix::Zero(centers.rows(), centers.cols())};
    if (data.empty()) return g;
    const double N = static_cast<double>(data.size());
    const double T0 = static_cast<double>(data.front().contexts.rows());
    const Eigen::Index C = centers.rows();

    for (std::size_t a = 0; a < data.size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const Vector mu = per_arm_params.row(ai).transpose();
        const Vector resid = data[a].rewards - data[a].contexts * mu;
        g.arms.row(ai) = -(data[a].contexts.transpose() * resid).transpose() / (N * T0);

        std::vector<double> dist(static_cast<std::size_t>(C));
        for (Eigen::Index c = 0; c < C; ++c)
            dist[static_cast<std::size_t>(c)] = (mu - centers.row(c).transpose()).norm();
        for (Eigen::Index c = 0; c < C; ++c) {
            double others = 1.0;
            for (Eigen::Index o = 0; o < C; ++o)
                if (o != c) others *= dist[static_cast<std::size_t>(o)];
            const Vector unit = (mu - centers.row(c).transpose()) / dist[static_cast<std::size_t>(c)];
            const Vector term = lambda1 / N * others * unit;
            g.arms.row(ai) += term.transpose();
            g.centers.row(c) -= term.transpose();
        }
    }
    return g;
}

// =============================================================================
// Assignment and error
// =============================================================================

std::vector<int> assign_clusters(const Matrix& per_arm_params, const Matrix& centers, double match_tol) {
    std::vector<int> labels(static_cast<std::size_t>(per_arm_params.rows()), kUnassigned);
    for (Eigen::Index a = 0; a < per_arm_params.rows(); ++a) {
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            if ((per_arm_params.row(a) - centers.row(c)).norm() <= match_tol) {
                labels[static_cast<std::size_t>(a)] = static_cast<int>(c) + 1;
                break;
            }
        }
    }
    return labels;
}

namespace {

// Minimum-cost perfect assignment on a square matrix; returns row -> column.
std::vector<std::size_t> hungarian(const Matrix& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

}  // namespace

Vector clustering_error(const std::vector<int>& estimated, const std::vector<int>& truth, std::size_t C) {
    if (estimated.size() != truth.size()) throw ValidationError("clustering_error: label arrays differ in length");
    const auto Ci = static_cast<Eigen::Index>(C);
    Matrix confusion = Matrix::Zero(Ci, Ci);  // estimated x true
    for (std::size_t a = 0; a < estimated.size(); ++a) {
        if (estimated[a] == kUnassigned) continue;
        if (estimated[a] < 1 || estimated[a] > static_cast<int>(C) || truth[a] < 1 || truth[a] > static_cast<int>(C))
            throw ValidationError("clustering_error: label out of range");
        confusion(estimated[a] - 1, truth[a] - 1) += 1.0;
    }

    std::vector<std::size_t> match(C);  // estimated cluster -> true cluster
    if (C <= 8) {
        std::vector<std::size_t> perm(C);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        double best = -1.0;
        do {
            double hits = 0.0;
            for (std::size_t c = 0; c < C; ++c)
                hits += confusion(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(perm[c]));
            if (hits > best) {
                best = hits;
                match = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        match = hungarian(-confusion);
    }

    Vector eps = Vector::Zero(Ci);
    for (std::size_t c = 0; c < C; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const double assigned = confusion.row(ci).sum();
        if (assigned == 0.0) continue;
        const double correct = confusion(ci, static_cast<Eigen::Index>(match[c]));
        eps[static_cast<Eigen::Index>(match[c])] = (assigned - correct) / assigned;
    }
    return eps;
}

// =============================================================================
// Fit
// =============================================================================

namespace {

struct ArmStats {
    Matrix gram;   // X'X
    Vector cross;  // X'r
    double rr;     // r'r
    double lipschitz;
};

Matrix kmeans(const Matrix& points, std::size_t C, int restarts, Rng& rng) {
    const Eigen::Index n = points.rows();
    const auto k = static_cast<Eigen::Index>(C);
    Matrix best_centers;
    double best_inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < restarts; ++restart) {
        // k-means++ seeding
        Matrix centers(k, points.cols());
        centers.row(0) = points.row(static_cast<Eigen::Index>(std::min<double>(uniform01(rng) * n, n - 1)));
        Vector d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
        for (Eigen::Index c = 1; c < k; ++c) {
            const double total = d2.sum();
            Eigen::Index pick = n - 1;
            if (total > 0.0) {
                double target = uniform01(rng) * total;
                for (Eigen::Index i = 0; i < n; ++i) {
                    target -= d2[i];
                    if (target < 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<Eigen::Index>(std::min<double>(uniform01(rng) * n, n - 1));
            }
            centers.row(c) = points.row(pick);
            d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
        }

        std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
        double inertia = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            bool changed = false;
            inertia = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Index arg = 0;
                const double dist = (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&arg);
                inertia += dist;
                if (assign[static_cast<std::size_t>(i)] != arg) {
                    assign[static_cast<std::size_t>(i)] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            Matrix sums = Matrix::Zero(k, points.cols());
            Vector counts = Vector::Zero(k);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
                counts[assign[static_cast<std::size_t>(i)]] += 1.0;
            }
            for (Eigen::Index c = 0; c < k; ++c) {
                if (counts[c] > 0.0) {
                    centers.row(c) = sums.row(c) / counts[c];
                } else {
                    // Empty cluster: move it to the worst-served point.
                    Eigen::Index far = 0;
                    Vector dd(n);
                    for (Eigen::Index i = 0; i < n; ++i)
                        dd[i] = (points.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
                    dd.maxCoeff(&far);
                    centers.row(c) = points.row(far);
                }
            }
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_centers = centers;
        }
    }
    return best_centers;
}

class ClassoSolver {
public:
    ClassoSolver(const std::vector<ArmSamples>& data, double lambda1)
        : lambda1_(lambda1), N_(static_cast<double>(data.size())),
          scale_(1.0 / (static_cast<double>(data.size()) * static_cast<double>(data.front().contexts.rows()))) {
        stats_.reserve(data.size());
        for (const auto& arm : data) {
            ArmStats s;
            s.gram = arm.contexts.transpose() * arm.contexts;
            s.cross = arm.contexts.transpose() * arm.rewards;
            s.rr = arm.rewards.squaredNorm();
            s.lipschitz = scale_ * Eigen::SelfAdjointEigenSolver<Matrix>(s.gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
            stats_.push_back(std::move(s));
        }
    }

    double loss(std::size_t a, const Vector& mu) const {
        const auto& s = stats_[a];
        return scale_ * (0.5 * s.rr - mu.dot(s.cross) + 0.5 * mu.dot(s.gram * mu));
    }

    Vector loss_grad(std::size_t a, const Vector& mu) const {
        return scale_ * (stats_[a].gram * mu - stats_[a].cross);
    }

    double penalty(const Vector& mu, const Matrix& centers) const {
        return lambda1_ / N_ * penalty_product(mu, centers);
    }

    double objective(const Matrix& arms, const Matrix& centers) const {
        double q = 0.0;
        for (std::size_t a = 0; a < stats_.size(); ++a) {
            const Vector mu = arms.row(static_cast<Eigen::Index>(a)).transpose();
            q += loss(a, mu) + penalty(mu, centers);
        }
        return q;
    }

    // Proximal-gradient steps on one arm, plus exact snaps to each center.
    void update_arm(std::size_t a, Matrix& arms, const Matrix& centers) const {
        const auto ai = static_cast<Eigen::Index>(a);
        Vector mu = arms.row(ai).transpose();
        double f = loss(a, mu) + penalty(mu, centers);

        const double L = stats_[a].lipschitz;
        if (L > 0.0) {
            for (int inner = 0; inner < kArmInnerSteps; ++inner) {
                const Vector grad = loss_grad(a, mu);
                bool accepted = false;
                for (double step = 1.0 / L; step > 1e-12 / L; step *= 0.5) {
                    const Vector cand = prox_step(mu - step * grad, step, centers);
                    const double fc = loss(a, cand) + penalty(cand, centers);
                    if (fc < f) {
                        mu = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                }
                if (!accepted) break;
            }
        }
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const Vector center = centers.row(c).transpose();
            const double fc = loss(a, center);
            if (fc < f) {
                mu = center;
                f = fc;
            }
        }
        arms.row(ai) = mu.transpose();
    }

    // Moves center c together with the arms fused to it.
    void update_center(Eigen::Index c, Matrix& arms, Matrix& centers) const {
        const Vector start = centers.row(c).transpose();
        std::vector<std::size_t> members, loose;
        for (std::size_t a = 0; a < stats_.size(); ++a) {
            const auto row = arms.row(static_cast<Eigen::Index>(a));
            if (row == centers.row(c)) {
                members.push_back(a);
                continue;
            }
            bool fused_elsewhere = false;
            for (Eigen::Index o = 0; o < centers.rows() && !fused_elsewhere; ++o)
                fused_elsewhere = (o != c) && row == centers.row(o);
            if (!fused_elsewhere) loose.push_back(a);
        }

        // Weight of each loose arm: product of distances to the other centers.
        std::vector<double> weight(loose.size(), 1.0);
        for (std::size_t i = 0; i < loose.size(); ++i)
            for (Eigen::Index o = 0; o < centers.rows(); ++o)
                if (o != c)
                    weight[i] *= (arms.row(static_cast<Eigen::Index>(loose[i])) - centers.row(o)).norm();

        auto block_value = [&](const Vector& mu) {
            double v = 0.0;
            for (auto a : members) v += loss(a, mu);
            for (std::size_t i = 0; i < loose.size(); ++i)
                v += lambda1_ / N_ * weight[i] * (arms.row(static_cast<Eigen::Index>(loose[i])).transpose() - mu).norm();
            return v;
        };
        auto block_grad = [&](const Vector& mu) {
            Vector g = Vector::Zero(mu.size());
            for (auto a : members) g += loss_grad(a, mu);
            for (std::size_t i = 0; i < loose.size(); ++i) {
                const Vector diff = mu - arms.row(static_cast<Eigen::Index>(loose[i])).transpose();
                const double n = diff.norm();
                if (n > 0.0) g += lambda1_ / N_ * weight[i] * diff / n;
            }
            return g;
        };

        double L = 0.0;
        for (auto a : members) L += stats_[a].lipschitz;
        double step = L > 0.0 ? 1.0 / L : 1.0;

        Vector mu = start;
        double f = block_value(mu);
        for (int inner = 0; inner < kCenterInnerSteps; ++inner) {
            const Vector g = block_grad(mu);
            const double gg = g.squaredNorm();
            if (gg == 0.0) break;
            bool accepted = false;
            for (int tries = 0; tries < 40; ++tries, step *= 0.5) {
                const Vector cand = mu - step * g;
                const double fc = block_value(cand);
                if (fc <= f - 1e-4 * step * gg) {
                    mu = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            step *= 2.0;
        }
        centers.row(c) = mu.transpose();
        for (auto a : members) arms.row(static_cast<Eigen::Index>(a)) = mu.transpose();
    }

    // Group soft-threshold toward the nearest center, with the other factors of
    // the product frozen at z.
    Vector prox_step(const Vector& z, double step, const Matrix& centers) const {
        Eigen::Index nearest = 0;
        (centers.rowwise() - z.transpose()).rowwise().squaredNorm().minCoeff(&nearest);
        double others = 1.0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c)
            if (c != nearest) others *= (z - centers.row(c).transpose()).norm();
        const Vector center = centers.row(nearest).transpose();
        const Vector diff = z - center;
        const double n = diff.norm();
        const double threshold = step * lambda1_ / N_ * others;
        if (n <= threshold) return center;
        return center + (1.0 - threshold / n) * diff;
    }

    std::size_t arms() const { return stats_.size(); }

private:
    static constexpr int kArmInnerSteps = 10;
    static constexpr int kCenterInnerSteps = 50;

    double lambda1_;
    double N_;
    double scale_;
    std::vector<ArmStats> stats_;
};

Vector pooled_least_squares(const std::vector<ArmSamples>& data, Eigen::Index m) {
    Matrix gram = Matrix::Zero(m, m);
    Vector cross = Vector::Zero(m);
    for (const auto& arm : data) {
        gram += arm.contexts.transpose() * arm.contexts;
        cross += arm.contexts.transpose() * arm.rewards;
    }
    return gram.completeOrthogonalDecomposition().solve(cross);
}

}  // namespace

ClusteringResult classifier_lasso_fit(const std::vector<ArmSamples>& data, std::size_t C, double lambda1,
                                      const ClusteringConfig& cfg, Rng& rng) {
    cfg.validate();
    if (data.empty()) throw ValidationError("classifier_lasso_fit: no arms");
    if (C == 0 || C > data.size()) throw ValidationError("classifier_lasso_fit: need 1 <= C <= number of arms");
    if (!(lambda1 >= 0.0)) throw ValidationError("classifier_lasso_fit: lambda1 must be nonnegative");
    const Eigen::Index m = data.front().contexts.cols();
    const auto N = static_cast<Eigen::Index>(data.size());
    check_shapes(Matrix::Zero(N, m), Matrix::Zero(static_cast<Eigen::Index>(C), m), data);

    ClusteringResult result;
    const ClassoSolver solver(data, lambda1);

    if (C == 1) {
        const Vector pooled = pooled_least_squares(data, m);
        result.centers = pooled.transpose();
        result.per_arm_params = pooled.transpose().replicate(N, 1);
        result.labels.assign(data.size(), 1);
        result.objective_value = solver.objective(result.per_arm_params, result.centers);
        result.objective_history = {result.objective_value};
        return result;
    }

    Matrix arms(N, m);
    for (Eigen::Index a = 0; a < N; ++a) {
        const auto& s = data[static_cast<std::size_t>(a)];
        const Matrix gram = s.contexts.transpose() * s.contexts + 1e-6 * Matrix::Identity(m, m);
        arms.row(a) = gram.ldlt().solve(s.contexts.transpose() * s.rewards).transpose();
    }
    Matrix centers = kmeans(arms, C, cfg.kmeans_restarts, rng);

    double q = solver.objective(arms, centers);
    if (!std::isfinite(q)) throw NumericalError("classifier_lasso_fit: non-finite objective at start");
    result.objective_history.push_back(q);

    int iter = 0;
    while (iter < cfg.max_iter) {
        ++iter;
        for (std::size_t a = 0; a < solver.arms(); ++a) solver.update_arm(a, arms, centers);
        for (Eigen::Index c = 0; c < centers.rows(); ++c) solver.update_center(c, arms, centers);
        const double next = solver.objective(arms, centers);
        if (!std::isfinite(next)) throw NumericalError("classifier_lasso_fit: non-finite objective");
        if (next > q + 1e-12 * std::max(1.0, std::abs(q)))
            throw NumericalError("classifier_lasso_fit: objective increased between iterations");
        result.objective_history.push_back(next);
        const double decrease = q - next;
        q = next;
        if (decrease < cfg.tol) break;
    }

    // Final snap: anything within match_tol of a center becomes that center.
    for (Eigen::Index a = 0; a < N; ++a) {
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            if ((arms.row(a) - centers.row(c)).norm() <= cfg.match_tol) {
                arms.row(a) = centers.row(c);
                break;
            }
        }
    }

    result.per_arm_params = std::move(arms);
    result.centers = std::move(centers);
    result.labels = assign_clusters(result.per_arm_params, result.centers, cfg.match_tol);
    result.objective_value = solver.objective(result.per_arm_params, result.centers);
    result.iterations = iter;
    return result;
}

}  // namespace cbwk
