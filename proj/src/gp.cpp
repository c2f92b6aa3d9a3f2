#include "fieldrec/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldrec {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kLogBoxLo = -13.815510557964274;  // log(1e-6)
constexpr double kLogBoxHi = 13.815510557964274;   // log(1e6)

void check_location(const Location& x) {
    if (!x.allFinite()) throw std::invalid_argument("non-finite coordinates");
}

Matrix distance_matrix(const std::vector<Location>& locations) {
    const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = (locations[i] - locations[j]).norm();
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

// Marginal likelihood pieces for a fixed distance matrix (fit inner loop).
GpMarginal marginal_from_distances(const Matrix& dist, const Vector& averages,
                                   const Vector& inv_counts, const KernelSpec& kernel,
                                   double noise_var, double mean_value) {
    const Eigen::Index n = averages.size();
    const Matrix t = (kSqrt3 / kernel.lengthscale) * dist;
    const Matrix expt = (-t).array().exp().matrix();
    Matrix k = kernel.variance * ((t.array() + 1.0) * expt.array()).matrix();
    k.diagonal() += noise_var * inv_counts;

    const Eigen::LLT<Matrix> llt = jittered_llt(k, kernel.variance + noise_var);
    const Vector r = averages - Vector::Constant(n, mean_value);
    const Vector alpha = llt.solve(r);
    const Matrix kinv = llt.solve(Matrix::Identity(n, n));

    GpMarginal out;
    out.log_likelihood = -0.5 * (r.dot(alpha) + llt_log_det(llt) +
                                 static_cast<double>(n) * std::log(2.0 * M_PI));

    // dK/dlog(variance) = C; dK/dlog(lengthscale) = variance * t^2 * exp(-t);
    // dK/dlog(noise) = noise_var * diag(inv_counts).
    const Matrix c = kernel.variance * ((t.array() + 1.0) * expt.array()).matrix();
    const Matrix dk_dlen = kernel.variance * (t.array().square() * expt.array()).matrix();
    auto trace_term = [&](const Matrix& dk) {
        return 0.5 * (alpha.dot(dk * alpha) - (kinv.cwiseProduct(dk)).sum());
    };
    out.gradient[0] = trace_term(c);
    out.gradient[1] = trace_term(dk_dlen);
    const Vector dnoise = noise_var * inv_counts;
    out.gradient[2] = 0.5 * (alpha.cwiseProduct(dnoise).dot(alpha) -
                             kinv.diagonal().dot(dnoise));
    out.gradient[3] = alpha.sum();
    return out;
}

}  // namespace

void KernelSpec::validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw std::invalid_argument("kernel variance must be positive");
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
        throw std::invalid_argument("kernel lengthscale must be positive");
}

MeanFunction constant_mean(double value) {
    return [value](const Location&) { return value; };
}

void GpModel::validate() const {
    kernel.validate();
    if (!mean) throw std::invalid_argument("gp model needs a mean function");
    if (noise_var < 0.0 || !std::isfinite(noise_var))
        throw std::invalid_argument("noise variance must be non-negative");
}

double matern32_at_distance(double distance, const KernelSpec& spec) {
    spec.validate();
    if (!std::isfinite(distance) || distance < 0.0)
        throw std::invalid_argument("distance must be finite and non-negative");
    const double t = kSqrt3 * distance / spec.lengthscale;
    return spec.variance * (1.0 + t) * std::exp(-t);
}

double matern32(const Location& x, const Location& y, const KernelSpec& spec) {
    check_location(x);
    check_location(y);
    return matern32_at_distance((x - y).norm(), spec);
}

Matrix build_covariance(const std::vector<Location>& locations, const KernelSpec& spec) {
    if (locations.empty()) throw std::invalid_argument("build_covariance: no locations");
    spec.validate();
    for (const auto& x : locations) check_location(x);
    const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
    Matrix c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, i) = spec.variance;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = matern32_at_distance((locations[i] - locations[j]).norm(), spec);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

Vector cross_covariance(const std::vector<Location>& locations, const Location& target,
                        const KernelSpec& spec) {
    spec.validate();
    check_location(target);
    Vector k(static_cast<Eigen::Index>(locations.size()));
    for (std::size_t i = 0; i < locations.size(); ++i)
        k[static_cast<Eigen::Index>(i)] =
            matern32_at_distance((locations[i] - target).norm(), spec);
    return k;
}

Vector mean_vector(const std::vector<Location>& locations, const MeanFunction& mean) {
    Vector m(static_cast<Eigen::Index>(locations.size()));
    for (std::size_t i = 0; i < locations.size(); ++i)
        m[static_cast<Eigen::Index>(i)] = mean(locations[i]);
    return m;
}

Vector gp_sample(const std::vector<Location>& locations, const GpModel& model, Rng& rng) {
    model.validate();
    const Matrix c = build_covariance(locations, model.kernel);
    const Eigen::LLT<Matrix> llt = jittered_llt(c, model.kernel.variance);
    Vector z(c.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean_vector(locations, model.mean) + Matrix(llt.matrixL()) * z;
}

GpMarginal gp_log_marginal(const std::vector<Location>& locations, const Vector& averages,
                           const std::vector<int>& counts, const KernelSpec& kernel,
                           double noise_var, double mean_value) {
    kernel.validate();
    if (locations.size() != static_cast<std::size_t>(averages.size()) ||
        locations.size() != counts.size())
        throw std::invalid_argument("gp_log_marginal: size mismatch");
    Vector inv_counts(averages.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 1) throw std::invalid_argument("gp_log_marginal: counts must be >= 1");
        inv_counts[static_cast<Eigen::Index>(i)] = 1.0 / counts[i];
    }
    return marginal_from_distances(distance_matrix(locations), averages, inv_counts, kernel,
                                   noise_var, mean_value);
}

HyperFit fit_hyperparameters(const std::vector<Location>& locations,
                             const std::vector<std::vector<double>>& observations,
                             const KernelSpec& init_kernel, double init_noise_var,
                             double init_mean) {
    if (locations.size() != observations.size())
        throw std::invalid_argument("fit_hyperparameters: size mismatch");
    if (locations.size() < 3)
        throw std::invalid_argument("fit_hyperparameters: need at least 3 locations");
    init_kernel.validate();
    if (!(init_noise_var > 0.0)) throw std::invalid_argument("initial noise variance must be > 0");

    const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
    Vector averages(n), inv_counts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& obs = observations[static_cast<std::size_t>(i)];
        if (obs.empty())
            throw std::invalid_argument("fit_hyperparameters: location without observations");
        double sum = 0.0;
        for (double v : obs) sum += v;
        averages[i] = sum / static_cast<double>(obs.size());
        inv_counts[i] = 1.0 / static_cast<double>(obs.size());
    }
    const Matrix dist = distance_matrix(locations);

    // x = (log variance, log lengthscale, log noise_var, mean); first three box
    // constrained to [log 1e-6, log 1e6].
    using Vec4 = Eigen::Vector4d;
    auto project = [](Vec4 x) {
        for (int i = 0; i < 3; ++i) x[i] = std::clamp(x[i], kLogBoxLo, kLogBoxHi);
        return x;
    };
    auto evaluate = [&](const Vec4& x) {
        KernelSpec k{std::exp(x[0]), std::exp(x[1])};
        return marginal_from_distances(dist, averages, inv_counts, k, std::exp(x[2]), x[3]);
    };
    auto make_fit = [&](const Vec4& x, double ll, int iters) {
        HyperFit fit;
        fit.model.kernel = KernelSpec{std::exp(x[0]), std::exp(x[1])};
        fit.model.noise_var = std::exp(x[2]);
        fit.model.mean = constant_mean(x[3]);
        fit.mean_value = x[3];
        fit.log_likelihood = ll;
        fit.iterations = iters;
        return fit;
    };

    Vec4 x = project(Vec4(std::log(init_kernel.variance), std::log(init_kernel.lengthscale),
                          std::log(init_noise_var), init_mean));
    GpMarginal cur = evaluate(x);
    if (!std::isfinite(cur.log_likelihood))
        throw FitFailure("fit_hyperparameters: non-finite objective at initialization",
                         make_fit(x, cur.log_likelihood, 0));

    Vec4 best_x = x;
    double best_ll = cur.log_likelihood;
    Eigen::Matrix4d h = Eigen::Matrix4d::Identity();  // inverse-Hessian approx (minimizing -LL)
    const int max_iters = 200;
    int iter = 0;
    for (; iter < max_iters; ++iter) {
        const Vec4 grad = -cur.gradient;  // gradient of -LL
        // Projected gradient for convergence: ignore components pushing outside the box.
        Vec4 free_grad = grad;
        for (int i = 0; i < 3; ++i) {
            if ((x[i] <= kLogBoxLo + 1e-14 && grad[i] > 0.0) ||
                (x[i] >= kLogBoxHi - 1e-14 && grad[i] < 0.0))
                free_grad[i] = 0.0;
        }
        if (free_grad.norm() < 1e-7 * (1.0 + std::abs(cur.log_likelihood))) break;

        Vec4 dir = -(h * grad);
        if (dir.dot(grad) >= 0.0) {  // not a descent direction; reset
            h.setIdentity();
            dir = -grad;
        }
        double step = 1.0;
        bool accepted = false;
        Vec4 x_new;
        GpMarginal eval_new;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = project(x + step * dir);
            if ((x_new - x).norm() < 1e-14) break;
            eval_new = evaluate(x_new);
            const double up = eval_new.log_likelihood - cur.log_likelihood;
            if (std::isfinite(eval_new.log_likelihood) &&
                up >= -1e-4 * step * dir.dot(grad)) {  // Armijo on the ascent
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (iter == 0)
                throw FitFailure("fit_hyperparameters: no ascent direction at initialization",
                                 make_fit(best_x, best_ll, iter));
            break;  // converged to line-search precision
        }
        const Vec4 s = x_new - x;
        const Vec4 y = -eval_new.gradient - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12) {  // BFGS update of the inverse Hessian
            const Eigen::Matrix4d i4 = Eigen::Matrix4d::Identity();
            const Eigen::Matrix4d v = i4 - (s * y.transpose()) / sy;
            h = v * h * v.transpose() + (s * s.transpose()) / sy;
        }
        x = x_new;
        cur = eval_new;
        if (cur.log_likelihood > best_ll) {
            best_ll = cur.log_likelihood;
            best_x = x;
        }
    }
    return make_fit(best_x, best_ll, iter);
}

}  // namespace fieldrec
