#include "psychkit/irt.hpp"

#include <algorithm>
#include <cmath>

#include "psychkit/distributions.hpp"
#include "psychkit/error.hpp"

namespace psychkit::irt {
namespace {

constexpr const char* kModule = "irt";

struct Posterior {
    Matrix weights;  // students x nodes
    double log_likelihood = 0.0;
};

// Posterior weights of every student over the grid for logits a*theta + c.
Posterior e_step(const Matrix& y, const Vector& a, const Vector& c, const QuadratureGrid& grid) {
    Matrix z = a * grid.nodes.transpose();
    z.colwise() += c;
    const Eigen::RowVectorXd log_fail =
        (-z.unaryExpr([](double v) { return softplus(v); })).colwise().sum();
    const Eigen::RowVectorXd log_prior = grid.weights.array().log().matrix().transpose();
    // log P - log(1 - P) is the logit itself.
    Matrix log_joint = y * z;
    log_joint.rowwise() += log_fail + log_prior;

    Posterior post;
    post.weights.resize(log_joint.rows(), log_joint.cols());
    double ll = 0.0;
    for (Index i = 0; i < log_joint.rows(); ++i) {
        const double peak = log_joint.row(i).maxCoeff();
        const Eigen::RowVectorXd w = (log_joint.row(i).array() - peak).exp().matrix();
        const double total = w.sum();
        post.weights.row(i) = w / total;
        ll += peak + std::log(total);
    }
    post.log_likelihood = ll;
    return post;
}

double item_objective(const Vector& r, const Vector& n, const Vector& theta, double a, double c,
                      double ridge) {
    double f = 0.0;
    for (Index q = 0; q < theta.size(); ++q) {
        const double z = a * theta(q) + c;
        f += r(q) * z - n(q) * softplus(z);
    }
    return f - 0.5 * ridge * ((a - 1.0) * (a - 1.0) + c * c);
}

// Newton ascent on one item's expected complete-data log-likelihood.
void m_step_item(const Vector& r, const Vector& n, const Vector& theta, const FitOptions& opt,
                 double& a, double& c) {
    double f = item_objective(r, n, theta, a, c, opt.ridge);
    for (int it = 0; it < 50; ++it) {
        Eigen::Vector2d g(-opt.ridge * (a - 1.0), -opt.ridge * c);
        Eigen::Matrix2d info = opt.ridge * Eigen::Matrix2d::Identity();
        for (Index q = 0; q < theta.size(); ++q) {
            const double p = logistic(a * theta(q) + c);
            const double resid = r(q) - n(q) * p;
            const double w = n(q) * p * (1.0 - p);
            g(0) += resid * theta(q);
            g(1) += resid;
            info(0, 0) += w * theta(q) * theta(q);
            info(0, 1) += w * theta(q);
            info(1, 1) += w;
        }
        info(1, 0) = info(0, 1);
        info.diagonal().array() += 1e-10;
        const Eigen::Vector2d step = info.ldlt().solve(g);
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            const double a_new = std::clamp(a + t * step(0), opt.min_slope, opt.max_slope);
            const double c_new = c + t * step(1);
            const double f_new = item_objective(r, n, theta, a_new, c_new, opt.ridge);
            if (f_new >= f) {
                improved = f_new > f;
                const double change = std::max(std::fabs(a_new - a), std::fabs(c_new - c));
                a = a_new;
                c = c_new;
                f = f_new;
                if (change < 1e-10) return;
                break;
            }
        }
        if (!improved) return;
    }
}

double shared_objective(const Matrix& r, const Vector& n, const Vector& theta, double a,
                        const Vector& c, double ridge) {
    double f = 0.0;
    for (Index j = 0; j < c.size(); ++j) {
        for (Index q = 0; q < theta.size(); ++q) {
            const double z = a * theta(q) + c(j);
            f += r(j, q) * z - n(q) * softplus(z);
        }
    }
    return f - 0.5 * ridge * ((a - 1.0) * (a - 1.0) + c.squaredNorm());
}

// Newton ascent over (shared slope, intercepts) for the 1PL model.
void m_step_shared(const Matrix& r, const Vector& n, const Vector& theta, const FitOptions& opt,
                   double& a, Vector& c) {
    const Index k = c.size();
    double f = shared_objective(r, n, theta, a, c, opt.ridge);
    for (int it = 0; it < 50; ++it) {
        Vector g = Vector::Zero(k + 1);
        Matrix info = Matrix::Zero(k + 1, k + 1);
        g(0) = -opt.ridge * (a - 1.0);
        g.tail(k) = -opt.ridge * c;
        info.diagonal().setConstant(opt.ridge + 1e-10);
        for (Index j = 0; j < k; ++j) {
            for (Index q = 0; q < theta.size(); ++q) {
                const double p = logistic(a * theta(q) + c(j));
                const double resid = r(j, q) - n(q) * p;
                const double w = n(q) * p * (1.0 - p);
                g(0) += resid * theta(q);
                g(1 + j) += resid;
                info(0, 0) += w * theta(q) * theta(q);
                info(0, 1 + j) += w * theta(q);
                info(1 + j, 1 + j) += w;
            }
            info(1 + j, 0) = info(0, 1 + j);
        }
        const Vector step = info.ldlt().solve(g);
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            const double a_new = std::clamp(a + t * step(0), opt.min_slope, opt.max_slope);
            const Vector c_new = c + t * step.tail(k);
            const double f_new = shared_objective(r, n, theta, a_new, c_new, opt.ridge);
            if (f_new >= f) {
                improved = f_new > f;
                const double change =
                    std::max(std::fabs(a_new - a), (c_new - c).cwiseAbs().maxCoeff());
                a = a_new;
                c = c_new;
                f = f_new;
                if (change < 1e-10) return;
                break;
            }
        }
        if (!improved) return;
    }
}

Vector intercepts(const IrtModel& model) { return -(model.a.array() * model.b.array()).matrix(); }

void check_grid(const QuadratureGrid& grid) {
    if (grid.nodes.size() < 2 || grid.nodes.size() != grid.weights.size())
        throw Error(kModule, "quadrature grid needs matching nodes and weights");
}

}  // namespace

QuadratureGrid normal_grid(Index n_nodes, double lo, double hi) {
    if (n_nodes < 2 || !(hi > lo)) throw Error(kModule, "invalid quadrature grid");
    QuadratureGrid grid;
    grid.nodes = Vector::LinSpaced(n_nodes, lo, hi);
    grid.weights = grid.nodes.unaryExpr([](double x) { return dist::normal_pdf(x); });
    grid.weights /= grid.weights.sum();
    return grid;
}

Index parameter_count(ModelKind kind, Index n_items) {
    return kind == ModelKind::one_pl ? n_items + 1 : 2 * n_items;
}

IrtModel fit(const ResponseMatrix& matrix, ModelKind kind, const QuadratureGrid& grid,
             const FitOptions& options) {
    return fit(matrix.scores(), matrix.items(), kind, grid, options);
}

IrtModel fit(const Matrix& y, const std::vector<std::string>& items, ModelKind kind,
             const QuadratureGrid& grid, const FitOptions& options) {
    check_grid(grid);
    const Index n = y.rows();
    const Index k = y.cols();
    if (static_cast<Index>(items.size()) != k) throw Error(kModule, "item labels do not match data");
    if (k < 2) throw Error(kModule, "fitting needs at least two items");
    if (n < 2) throw Error(kModule, "fitting needs at least two students");

    Vector a = Vector::Ones(k);
    Vector c(k);
    for (Index j = 0; j < k; ++j) {
        const double p = y.col(j).mean();
        if (p <= 0.0 || p >= 1.0)
            throw Error(kModule, "item " + items[static_cast<std::size_t>(j)] +
                                     " is answered " + (p <= 0.0 ? "incorrectly" : "correctly") +
                                     " by everyone; difficulty has no finite estimate");
        c(j) = std::log(p / (1.0 - p)) * std::sqrt(1.0 + M_PI / 8.0);
    }

    IrtModel model;
    model.kind = kind;
    model.items = items;
    model.n_students = n;
    model.n_params = parameter_count(kind, k);

    const Vector& theta = grid.nodes;
    Vector b_prev = -(c.array() / a.array()).matrix();
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        const Posterior post = e_step(y, a, c, grid);
        model.log_likelihood_trace.push_back(post.log_likelihood);
        const Vector nq = post.weights.colwise().sum().transpose();
        const Matrix rq = y.transpose() * post.weights;  // items x nodes
        const Vector a_prev = a;
        if (kind == ModelKind::two_pl) {
            for (Index j = 0; j < k; ++j) {
                const Vector r = rq.row(j).transpose();
                m_step_item(r, nq, theta, options, a(j), c(j));
            }
        } else {
            double shared = a(0);
            m_step_shared(rq, nq, theta, options, shared, c);
            a.setConstant(shared);
        }
        const Vector b = -(c.array() / a.array()).matrix();
        const double change =
            std::max((a - a_prev).cwiseAbs().maxCoeff(), (b - b_prev).cwiseAbs().maxCoeff());
        b_prev = b;
        model.n_iterations = iter;
        if (change < options.tol) {
            model.converged = true;
            break;
        }
    }
    model.a = a;
    model.b = b_prev;
    model.log_likelihood = e_step(y, a, c, grid).log_likelihood;
    model.log_likelihood_trace.push_back(model.log_likelihood);
    return model;
}

double marginal_log_likelihood(const Matrix& y, const IrtModel& model, const QuadratureGrid& grid) {
    check_grid(grid);
    if (y.cols() != model.n_items()) throw Error(kModule, "data and model differ in item count");
    return e_step(y, model.a, intercepts(model), grid).log_likelihood;
}

Matrix parameter_covariance(const Matrix& y, const IrtModel& model, const QuadratureGrid& grid) {
    check_grid(grid);
    const Index k = model.n_items();
    if (y.cols() != k) throw Error(kModule, "data and model differ in item count");
    const bool two_pl = model.kind == ModelKind::two_pl;
    const Index p = two_pl ? 2 * k : k + 1;

    Vector psi(p);
    if (two_pl) {
        for (Index j = 0; j < k; ++j) {
            psi(2 * j) = model.a(j);
            psi(2 * j + 1) = model.b(j);
        }
    } else {
        psi(0) = model.a(0);
        psi.tail(k) = model.b;
    }

    const Vector& theta = grid.nodes;
    auto score = [&](const Vector& v) {
        Vector a(k), b(k);
        if (two_pl) {
            for (Index j = 0; j < k; ++j) {
                a(j) = v(2 * j);
                b(j) = v(2 * j + 1);
            }
        } else {
            a.setConstant(v(0));
            b = v.tail(k);
        }
        const Vector c = -(a.array() * b.array()).matrix();
        const Posterior post = e_step(y, a, c, grid);
        const Vector nq = post.weights.colwise().sum().transpose();
        const Matrix rq = y.transpose() * post.weights;
        Vector g = Vector::Zero(p);
        for (Index j = 0; j < k; ++j) {
            double ga = 0.0;
            double gb = 0.0;
            for (Index q = 0; q < theta.size(); ++q) {
                const double resid = rq(j, q) - nq(q) * response_probability(theta(q), a(j), b(j));
                ga += resid * (theta(q) - b(j));
                gb -= resid * a(j);
            }
            if (two_pl) {
                g(2 * j) = ga;
                g(2 * j + 1) = gb;
            } else {
                g(0) += ga;
                g(1 + j) = gb;
            }
        }
        return g;
    };

    Matrix hessian(p, p);
    for (Index m = 0; m < p; ++m) {
        const double h = 1e-4 * std::max(1.0, std::fabs(psi(m)));
        Vector up = psi;
        Vector down = psi;
        up(m) += h;
        down(m) -= h;
        hessian.col(m) = (score(up) - score(down)) / (2.0 * h);
    }
    const Matrix info = -0.5 * (hessian + hessian.transpose());
    const Eigen::FullPivLU<Matrix> lu(info);
    if (!lu.isInvertible()) throw Error(kModule, "observed information is singular");
    return lu.inverse();
}

std::vector<Matrix> item_covariances(const Matrix& cov, const IrtModel& model) {
    const Index k = model.n_items();
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        if (model.kind == ModelKind::two_pl)
            out.emplace_back(cov.block(2 * j, 2 * j, 2, 2));
        else
            out.emplace_back(cov.block(1 + j, 1 + j, 1, 1));
    }
    return out;
}

InformationCriteria information_criteria(double ll, Index n_params, Index n_students) {
    if (n_students < 1) throw Error(kModule, "information criteria need n >= 1");
    return {-2.0 * ll + 2.0 * static_cast<double>(n_params),
            -2.0 * ll + static_cast<double>(n_params) * std::log(static_cast<double>(n_students))};
}

FitComparison compare(double ll_small, Index p_small, double ll_large, Index p_large,
                      Index n_students) {
    if (p_large < p_small) throw Error(kModule, "models are not nested: larger model has fewer parameters");
    FitComparison out;
    out.small = information_criteria(ll_small, p_small, n_students);
    out.large = information_criteria(ll_large, p_large, n_students);
    out.lrt = 2.0 * (ll_large - ll_small);
    out.df = p_large - p_small;
    out.p_value = out.df == 0 ? 1.0 : dist::chi2_sf(std::max(0.0, out.lrt), static_cast<double>(out.df));
    return out;
}

FitComparison compare(const IrtModel& small, const IrtModel& large, Index n_students) {
    if (small.items != large.items) throw Error(kModule, "models were fitted on different item sets");
    if (small.kind == ModelKind::two_pl && large.kind == ModelKind::one_pl)
        throw Error(kModule, "a 2PL model is not nested in a 1PL model");
    return compare(small.log_likelihood, small.n_params, large.log_likelihood, large.n_params,
                   n_students);
}

std::string to_string(ModelKind kind) { return kind == ModelKind::one_pl ? "1PL" : "2PL"; }

ModelKind parse_model_kind(const std::string& s) {
    if (s == "1pl" || s == "1PL") return ModelKind::one_pl;
    if (s == "2pl" || s == "2PL") return ModelKind::two_pl;
    throw Error(kModule, "unknown model kind " + s + " (expected 1pl or 2pl)");
}

}  // namespace psychkit::irt
