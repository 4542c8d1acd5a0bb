#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <adaptive/common.hpp>

namespace adaptive {

/// One censored time-to-event observation.
///
/// Censoring polarity: `censored == true` means the follow-up ended before the
/// event (c = 1); `censored == false` means the event was observed (c = 0).
/// CSV readers can flip this at parse time, see CensorCoding.
struct SurvivalRecord {
    std::string subject_id;
    ContextVector x;
    double t = 0.0;
    bool censored = false;
};

enum class CensorCoding {
    one_means_censored,  // default: c = 1 -> censored
    one_means_event,
};

/// CSV with header `subject_id,t,c,<feature columns...>`.
std::vector<SurvivalRecord> read_survival_csv(std::istream & in,
                                              CensorCoding coding = CensorCoding::one_means_censored);

struct CurvePoint {
    double time = 0.0;
    double survival = 1.0;
    std::size_t at_risk = 0;
    std::size_t events = 0;
    std::size_t censored = 0;
};

/// Product-limit curve. Holds every distinct observed time; survival only
/// drops at times with events.
struct SurvivalCurve {
    std::vector<CurvePoint> points;

    /// Step-function value S(t); 1 before the first event.
    double at(double t) const;
};

SurvivalCurve fit_kaplan_meier(std::span<const SurvivalRecord> records);

/// Time discretisation for the logistic-hazard model.
struct PeriodLayout {
    double max_followup = 1.0;  // M
    double period = 1.0;

    std::size_t periods() const;  // H = ceil(M / period)
};

struct HazardHyper {
    double l2 = 1e-2;
    int max_iterations = 100;
    double tolerance = 1e-8;  // on the gradient norm of the penalized loss
};

/// Person-period expansion: one row per (subject, period at risk), columns
/// are the context followed by a one-hot of the period.
struct PersonPeriodData {
    Matrix design;
    Vector label;
};

/// Events contribute periods 1..ceil(t/period) with the last labelled 1;
/// censored records contribute only the fully completed periods
/// 1..floor(t/period), all labelled 0.
PersonPeriodData expand_person_periods(std::span<const SurvivalRecord> records, const PeriodLayout & layout);

/// Penalized negative log-likelihood and its gradient over the expansion.
double hazard_objective(const Vector & coefficients, const PersonPeriodData & data, double l2);
Vector hazard_gradient(const Vector & coefficients, const PersonPeriodData & data, double l2);

/// Discrete-time logistic hazard: hazard_h(x) = sigmoid(w.x + gamma_h).
struct HazardModel {
    PeriodLayout layout;
    std::size_t dim = 0;
    Vector coefficients;  // [w (dim), gamma (H)]
    int iterations = 0;
    double final_loss = 0.0;
    double gradient_norm = 0.0;

    std::size_t periods() const { return layout.periods(); }
    /// Hazard in period h (0-based).
    double hazard(const ContextVector & x, std::size_t h) const;
};

HazardModel fit_discrete_hazard(std::span<const SurvivalRecord> records, const PeriodLayout & layout,
                                const HazardHyper & hyper = {});

/// S(1..horizon | x), each entry the product of (1 - hazard) up to that period.
std::vector<double> predict_survival(const HazardModel & model, const ContextVector & x, std::size_t horizon);

/// Highest risk (lowest S(horizon)) first, ties by subject id.
std::vector<std::string> risk_rank(const HazardModel & model,
                                   std::span<const std::pair<std::string, ContextVector>> cohort,
                                   std::size_t horizon);

} // namespace adaptive
