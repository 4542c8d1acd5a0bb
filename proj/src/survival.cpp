#include <adaptive/survival.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace adaptive {

namespace {

constexpr double kSlack = 1e-9;

double sigmoid(double z) {
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

std::vector<std::string> split_csv(const std::string & line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    for (auto & c : out) {
        const auto b = c.find_first_not_of(" \t\r");
        const auto e = c.find_last_not_of(" \t\r");
        c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
    }
    return out;
}

double parse_number(const std::string & s, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v))
        throw Error("input", "line " + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::size_t event_period(double t, double period) {
    return static_cast<std::size_t>(std::ceil(t / period - kSlack));
}

std::size_t completed_periods(double t, double period) {
    return static_cast<std::size_t>(std::floor(t / period + kSlack));
}

} // namespace

std::vector<SurvivalRecord> read_survival_csv(std::istream & in, CensorCoding coding) {
    std::string line;
    if (!std::getline(in, line))
        throw Error("input", "survival CSV: missing header row");
    const auto header = split_csv(line);
    if (header.size() < 3 || header[0] != "subject_id" || header[1] != "t" || header[2] != "c")
        throw Error("input", "survival CSV: header must start with subject_id,t,c");
    const std::size_t dim = header.size() - 3;

    std::vector<SurvivalRecord> records;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw Error("input", "line " + std::to_string(n) + ": expected " + std::to_string(header.size()) +
                                     " columns");
        SurvivalRecord r;
        r.subject_id = cells[0];
        r.t = parse_number(cells[1], n);
        const double c = parse_number(cells[2], n);
        if (c != 0.0 && c != 1.0)
            throw Error("input", "line " + std::to_string(n) + ": censoring flag must be 0 or 1");
        r.censored = (c == 1.0) == (coding == CensorCoding::one_means_censored);
        r.x.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t j = 0; j < dim; ++j)
            r.x[static_cast<Eigen::Index>(j)] = parse_number(cells[3 + j], n);
        if (!(r.t > 0.0))
            throw Error("input", "line " + std::to_string(n) + ": time must be positive");
        records.push_back(std::move(r));
    }
    return records;
}

double SurvivalCurve::at(double t) const {
    double s = 1.0;
    for (const auto & p : points) {
        if (p.time > t)
            break;
        s = p.survival;
    }
    return s;
}

SurvivalCurve fit_kaplan_meier(std::span<const SurvivalRecord> records) {
    if (records.empty())
        throw Error("input", "Kaplan-Meier needs at least one record");

    // time -> (events, censorings)
    std::map<double, std::pair<std::size_t, std::size_t>> tally;
    for (const auto & r : records) {
        if (!(r.t > 0.0) || !std::isfinite(r.t))
            throw Error("input", "survival time must be positive and finite");
        auto & [ev, ce] = tally[r.t];
        (r.censored ? ce : ev) += 1;
    }

    SurvivalCurve curve;
    std::size_t at_risk = records.size();
    double s = 1.0;
    for (const auto & [time, counts] : tally) {
        const auto [events, censored] = counts;
        // Events at a time precede censorings at the same time.
        if (events > 0)
            s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
        curve.points.push_back({time, s, at_risk, events, censored});
        at_risk -= events + censored;
    }
    return curve;
}

std::size_t PeriodLayout::periods() const {
    if (!(period > 0.0) || !(max_followup > 0.0))
        throw Error("input", "period and max_followup must be positive");
    return static_cast<std::size_t>(std::ceil(max_followup / period - kSlack));
}

PersonPeriodData expand_person_periods(std::span<const SurvivalRecord> records, const PeriodLayout & layout) {
    const std::size_t H = layout.periods();
    const std::size_t dim = records.empty() ? 0 : static_cast<std::size_t>(records.front().x.size());

    std::size_t rows = 0;
    for (const auto & r : records) {
        if (static_cast<std::size_t>(r.x.size()) != dim)
            throw Error("dimension", "survival records have inconsistent feature dimension");
        if (!(r.t > 0.0) || r.t > layout.max_followup + kSlack)
            throw Error("input", "survival time outside (0, M]: " + r.subject_id);
        rows += r.censored ? completed_periods(r.t, layout.period) : event_period(r.t, layout.period);
    }

    PersonPeriodData data{Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim + H)),
                          Vector::Zero(static_cast<Eigen::Index>(rows))};
    Eigen::Index row = 0;
    for (const auto & r : records) {
        const std::size_t n = r.censored ? completed_periods(r.t, layout.period) : event_period(r.t, layout.period);
        for (std::size_t h = 0; h < std::min(n, H); ++h, ++row) {
            data.design.row(row).head(static_cast<Eigen::Index>(dim)) = r.x.transpose();
            data.design(row, static_cast<Eigen::Index>(dim + h)) = 1.0;
            data.label[row] = (!r.censored && h + 1 == n) ? 1.0 : 0.0;
        }
    }
    return data;
}

double hazard_objective(const Vector & coefficients, const PersonPeriodData & data, double l2) {
    const Vector eta = data.design * coefficients;
    double loss = 0.5 * l2 * coefficients.squaredNorm();
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        loss += softplus(eta[i]) - data.label[i] * eta[i];
    return loss;
}

Vector hazard_gradient(const Vector & coefficients, const PersonPeriodData & data, double l2) {
    Vector residual = data.design * coefficients;
    for (Eigen::Index i = 0; i < residual.size(); ++i)
        residual[i] = sigmoid(residual[i]) - data.label[i];
    return data.design.transpose() * residual + l2 * coefficients;
}

double HazardModel::hazard(const ContextVector & x, std::size_t h) const {
    if (static_cast<std::size_t>(x.size()) != dim)
        throw Error("dimension", "context dimension does not match hazard model");
    const auto d = static_cast<Eigen::Index>(dim);
    return sigmoid(coefficients.head(d).dot(x) + coefficients[d + static_cast<Eigen::Index>(h)]);
}

HazardModel fit_discrete_hazard(std::span<const SurvivalRecord> records, const PeriodLayout & layout,
                                const HazardHyper & hyper) {
    if (records.empty())
        throw Error("input", "hazard fit needs at least one record");
    if (hyper.l2 < 0.0)
        throw Error("input", "l2 penalty must be non-negative");

    HazardModel model;
    model.layout = layout;
    model.dim = static_cast<std::size_t>(records.front().x.size());
    const PersonPeriodData data = expand_person_periods(records, layout);
    const auto p = data.design.cols();

    Vector beta = Vector::Zero(p);
    double loss = hazard_objective(beta, data, hyper.l2);
    for (int iter = 0; iter <= hyper.max_iterations; ++iter) {
        const Vector grad = hazard_gradient(beta, data, hyper.l2);
        const double gnorm = grad.norm();
        if (gnorm <= hyper.tolerance) {
            model.coefficients = beta;
            model.iterations = iter;
            model.final_loss = loss;
            model.gradient_norm = gnorm;
            return model;
        }
        if (iter == hyper.max_iterations)
            break;

        Vector weights = data.design * beta;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            const double q = sigmoid(weights[i]);
            weights[i] = q * (1.0 - q);
        }
        Matrix hessian = data.design.transpose() * weights.asDiagonal() * data.design;
        hessian.diagonal().array() += hyper.l2;
        // A tiny ridge keeps the solve defined when l2 = 0 and a column is empty.
        hessian.diagonal().array() += 1e-12;
        const Vector step = hessian.ldlt().solve(grad);

        // Backtracking keeps the objective monotone, up to rounding in the loss.
        const double slack = 1e-12 * (1.0 + std::abs(loss));
        double scale = 1.0;
        Vector candidate = beta - step;
        double cand_loss = hazard_objective(candidate, data, hyper.l2);
        while (cand_loss > loss + slack && scale > 1e-10) {
            scale *= 0.5;
            candidate = beta - scale * step;
            cand_loss = hazard_objective(candidate, data, hyper.l2);
        }
        if (cand_loss > loss + slack)
            break;
        beta = candidate;
        loss = cand_loss;
    }
    throw Error("convergence", "discrete hazard fit did not converge; last loss " + format_double(loss));
}

std::vector<double> predict_survival(const HazardModel & model, const ContextVector & x, std::size_t horizon) {
    if (horizon > model.periods())
        throw Error("input", "horizon exceeds the model's number of periods");
    std::vector<double> s;
    s.reserve(horizon);
    double running = 1.0;
    for (std::size_t h = 0; h < horizon; ++h) {
        running *= 1.0 - model.hazard(x, h);
        s.push_back(running);
    }
    return s;
}

std::vector<std::string> risk_rank(const HazardModel & model,
                                   std::span<const std::pair<std::string, ContextVector>> cohort,
                                   std::size_t horizon) {
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(cohort.size());
    for (const auto & [id, x] : cohort) {
        const auto s = predict_survival(model, x, horizon);
        scored.emplace_back(s.empty() ? 1.0 : s.back(), id);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    out.reserve(scored.size());
    for (auto & [_, id] : scored)
        out.push_back(std::move(id));
    return out;
}

} // namespace adaptive
