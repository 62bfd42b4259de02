#pragma once

#include <string>
#include <utility>

#include "lqgalloc/portfolio.hpp"
#include "lqgalloc/state_space.hpp"

namespace lqgalloc {

// Parameters of the separable alpha/impact market model. Units: prices and
// returns in price units per step, trades in fractions of daily volume.
struct SeparableModelParams {
    double omega_p = 0.1;    // alpha mean-reversion rate per step, in (0,1)
    double beta_p = 1.8e-3;  // alpha innovation scale
    double sigma = 0.02;     // unpredictable return volatility per step
    double omega_i = 0.2;    // impact decay rate per step, in (0,1)
    double gamma_i = 0.06;   // instantaneous impact per unit traded volume
    double beta_i = -0.048;  // impact relaxation scale; cumulative impact of a
                             // unit trade is gamma_i + beta_i
    double eta = 0.5;        // execution timing weight, in [0,1]
    double y_ratio = 3.0;    // Y in gamma_i = Y * sigma / v_daily
    double v_daily = 1.0;    // daily volume normalization

    double permanent_fraction() const { return (gamma_i + beta_i) / gamma_i; }
};

// Reports every violated parameter constraint; empty means valid.
std::vector<Violation> validate_params(const SeparableModelParams& p);

// 5-state, 1-input, 4-output system with state order
// (Q, x_dec, x_exe, x_p, x_i) and output order (Q, r_dec, r_exe, x_p):
//
//   A = [1  0  0  0        0      ]      B = [1              ]
//       [0  0  0  1        1      ]          [gamma_i        ]
//       [0  0  0  eta      eta-1  ]          [gamma_i*(eta-1)]
//       [0  0  0  1-om_p   0      ]          [0              ]
//       [0  0  0  0        1-om_i ]          [om_i*beta_i    ]
//
// sigma_x has the correlated (x_dec, x_exe) return block and the alpha cell;
// sigma_y = 0. Selectors pick observation rows 1, 2, 3 for (Q, dec, exe).
std::pair<LinearStateSpace, OutputSelectors> build_separable_model(const SeparableModelParams& p);

// Inverts Sh_y = beta_p (1 - omega_p) / (sigma sqrt(1 - (1-omega_p)^2)) * sqrt(250)
// for beta_p.
double calibrate_predictor(double target_sharpe_yearly, double sigma, double omega_p);

// gamma_i = y_ratio * sigma / v_daily and beta_i = -(1 - permanent_fraction) * gamma_i,
// so the cumulative impact of a unit trade is permanent_fraction * gamma_i.
std::pair<double, double> calibrate_impact(double y_ratio, double sigma, double v_daily,
                                           double permanent_fraction);

// Reads parameters from a JSON object with exactly the field names of
// SeparableModelParams; unknown keys are an error, missing keys keep the
// defaults above. Throws ConfigError.
SeparableModelParams params_from_json_text(const std::string& text);

} // namespace lqgalloc
