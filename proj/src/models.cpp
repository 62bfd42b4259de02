#include "lqgalloc/models.hpp"

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "lqgalloc/errors.hpp"

namespace lqgalloc {

std::vector<Violation> validate_params(const SeparableModelParams& p) {
    std::vector<Violation> v;
    if (!(p.omega_p > 0.0 && p.omega_p < 1.0))
        v.push_back({"omega_p", "must lie in (0, 1)"});
    if (!(p.omega_i > 0.0 && p.omega_i < 1.0))
        v.push_back({"omega_i", "must lie in (0, 1)"});
    if (!(p.sigma > 0.0)) v.push_back({"sigma", "must be positive"});
    if (!(p.eta >= 0.0 && p.eta <= 1.0)) v.push_back({"eta", "must lie in [0, 1]"});
    if (!(p.v_daily > 0.0)) v.push_back({"v_daily", "must be positive"});
    if (p.gamma_i > 0.0) {
        const double f = p.permanent_fraction();
        if (!(f >= -1e-12 && f <= 1.0 + 1e-12))
            v.push_back({"beta_i", "permanent fraction (gamma_i + beta_i)/gamma_i outside [0, 1]"});
    }
    return v;
}

std::pair<LinearStateSpace, OutputSelectors> build_separable_model(const SeparableModelParams& p) {
    const auto violations = validate_params(p);
    if (!violations.empty())
        throw ConfigError(violations.front().field, violations.front().message);

    LinearStateSpace ss;
    ss.state_labels = {"Q", "x_dec", "x_exe", "x_p", "x_i"};
    ss.input_labels = {"q"};
    ss.output_labels = {"Q", "r_dec", "r_exe", "x_p"};

    ss.A.setZero(5, 5);
    ss.A(0, 0) = 1.0;
    ss.A(1, 3) = 1.0;
    ss.A(1, 4) = 1.0;
    ss.A(2, 3) = p.eta;
    ss.A(2, 4) = p.eta - 1.0;
    ss.A(3, 3) = 1.0 - p.omega_p;
    ss.A(4, 4) = 1.0 - p.omega_i;

    ss.B.setZero(5, 1);
    ss.B(0, 0) = 1.0;
    ss.B(1, 0) = p.gamma_i;
    ss.B(2, 0) = p.gamma_i * (p.eta - 1.0);
    ss.B(4, 0) = p.omega_i * p.beta_i;

    ss.C.setZero(4, 5);
    ss.C(0, 0) = 1.0;
    ss.C(1, 1) = 1.0;
    ss.C(2, 2) = 1.0;
    ss.C(3, 3) = 1.0;

    const double s2 = p.sigma * p.sigma;
    ss.sigma_x.setZero(5, 5);
    ss.sigma_x(1, 1) = s2;
    ss.sigma_x(1, 2) = p.eta * s2;
    ss.sigma_x(2, 1) = p.eta * s2;
    ss.sigma_x(2, 2) = p.eta * p.eta * s2;
    ss.sigma_x(3, 3) = p.beta_p * p.beta_p;

    ss.sigma_y.setZero(4, 4);

    OutputSelectors sel;
    sel.pi_q.setZero(1, 4);
    sel.pi_dec.setZero(1, 4);
    sel.pi_exe.setZero(1, 4);
    sel.pi_q(0, 0) = 1.0;
    sel.pi_dec(0, 1) = 1.0;
    sel.pi_exe(0, 2) = 1.0;
    return {ss, sel};
}

double calibrate_predictor(double target_sharpe_yearly, double sigma, double omega_p) {
    if (sigma <= 0.0) throw ConfigError("sigma", "must be positive");
    if (!(omega_p > 0.0 && omega_p < 1.0)) throw ConfigError("omega_p", "must lie in (0, 1)");
    const double rho = 1.0 - omega_p;
    return target_sharpe_yearly * sigma * std::sqrt(1.0 - rho * rho) /
           (rho * std::sqrt(250.0));
}

std::pair<double, double> calibrate_impact(double y_ratio, double sigma, double v_daily,
                                           double permanent_fraction) {
    if (v_daily <= 0.0) throw ConfigError("v_daily", "must be positive");
    if (!(permanent_fraction >= 0.0 && permanent_fraction <= 1.0))
        throw ConfigError("permanent_fraction", "must lie in [0, 1]");
    const double gamma_i = y_ratio * sigma / v_daily;
    const double beta_i = -(1.0 - permanent_fraction) * gamma_i;
    return {gamma_i, beta_i};
}

SeparableModelParams params_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("model", std::string("JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("model", "expected a JSON object");

    static const std::set<std::string> known = {"omega_p", "beta_p",  "sigma",
                                                "omega_i", "gamma_i", "beta_i",
                                                "eta",     "y_ratio", "v_daily"};
    SeparableModelParams p;
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError(key, "unknown model parameter");
        if (!value.is_number()) throw ConfigError(key, "must be a number");
        const double x = value.get<double>();
        if (key == "omega_p") p.omega_p = x;
        else if (key == "beta_p") p.beta_p = x;
        else if (key == "sigma") p.sigma = x;
        else if (key == "omega_i") p.omega_i = x;
        else if (key == "gamma_i") p.gamma_i = x;
        else if (key == "beta_i") p.beta_i = x;
        else if (key == "eta") p.eta = x;
        else if (key == "y_ratio") p.y_ratio = x;
        else if (key == "v_daily") p.v_daily = x;
    }
    const auto violations = validate_params(p);
    if (!violations.empty())
        throw ConfigError(violations.front().field, violations.front().message);
    return p;
}

} // namespace lqgalloc
