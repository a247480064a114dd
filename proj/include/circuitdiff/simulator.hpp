#pragma once

// Monte-Carlo PVT sampler and analytic alpha-power-law gate-delay oracle.
//
// The oracle stands in for transistor-level simulation. For each observed
// output node it computes
//
//   Id      = K * m(T) * (W/L) * (tox_nom0/tox_e) * (Vdd - Vth_eff)^alpha
//   m(T)    = ((T + 273.15) / 300.15)^-1.5
//   Vth_eff = (Vth0 - 0.0008 (T - 27)) * (Ndep/Ndep0)^0.1 * (Xj0/Xj)^0.05
//   delay   = stages * ln2 * C_L * Vdd / (2 * Id / stack_depth)
//
// using the NMOS drive for the falling (hl) delay and the PMOS drive for the
// rising (lh) delay.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "circuitdiff/schema.hpp"

namespace circuitdiff {

struct DeviceNominals {
    double length;      // m
    double width;       // m
    double tox_e;       // electrical oxide thickness, m
    double tox_nom;     // nominal gate oxide thickness, m
    double xj;          // junction depth, m
    double ndep;        // channel doping, cm^-3
};

struct ProcessNominals {
    DeviceNominals nmos{22e-9, 44e-9, 1.0e-9, 1.0e-9, 10e-9, 3e18};
    DeviceNominals pmos{22e-9, 88e-9, 1.0e-9, 1.0e-9, 10e-9, 3e18};
    double vdd = 0.8;       // V
    double temp_min = -55.0;  // degC
    double temp_max = 125.0;  // degC
    double c_load = 1e-15;  // F
    double vth0 = 0.3;      // V

    /// Throws InvalidConfig unless every value is strictly positive and the
    /// temperature range is ordered.
    void validate() const;
};

/// Relative 1-sigma spread of the Gaussian parameters: +/-10% at 3 sigma.
inline constexpr double kRelativeSigma = 0.1 / 3.0;
/// Supply voltage is drawn uniformly within +/-10% of nominal.
inline constexpr double kSupplySpread = 0.1;

struct DeviceParams {
    double length;
    double width;
    double tox_e;
    double tox_nom;
    double xj;
    double ndep;
};

/// One Monte-Carlo draw of the 15 input features, in schema column order.
struct PvtSample {
    double vdd;
    double temp;
    double c_load;
    DeviceParams nmos;
    DeviceParams pmos;

    std::array<double, kInputFeatureCount> to_array() const noexcept;
    static PvtSample from_span(std::span<const double> inputs);

    /// Vdd within +/-10% of `nominals.vdd`, T within the sampled span and every
    /// geometric/doping value positive.
    bool in_range(const ProcessNominals& nominals) const noexcept;
};

struct NodeTopology {
    int nmos_stack;
    int pmos_stack;
    int stages;
};

struct GateTopology {
    Circuit circuit;
    std::vector<NodeTopology> nodes;
};

/// Fixed stack-depth / stage table for each circuit. Nodes follow the
/// single-input-switching convention: node k is the path from input k to the
/// observed output while the other inputs hold their enabling values.
GateTopology topology_for(Circuit circuit);

PvtSample sample_pvt(const ProcessNominals& nominals, std::mt19937_64& rng);
PvtSample sample_pvt(const ProcessNominals& nominals, std::uint64_t rng_seed);

/// The sample with every parameter at nominal and T = 27 degC.
PvtSample nominal_pvt(const ProcessNominals& nominals);

struct OracleConstants {
    double k_drive = 100e-6;  // A per V^alpha per square
    double alpha = 1.3;
    double t_ref_celsius = 27.0;
    double vth_temp_coeff = 0.0008;  // V / K
};

/// Drive current of one device at the sampled conditions.
double drive_current(const DeviceParams& dev, const DeviceNominals& nominal, double vdd, double temp,
                     double vth0, const OracleConstants& k = {});

/// Output delays (seconds) ordered [lh_a, hl_a, lh_b, hl_b, ...].
std::vector<double> delay_oracle(const GateTopology& topology, const PvtSample& pvt,
                                 const ProcessNominals& nominals = {}, const OracleConstants& k = {});

/// Deterministic random stream for row `row` of a dataset generated with `seed`.
std::mt19937_64 row_stream(std::uint64_t seed, std::uint64_t row);

Dataset generate_dataset(Circuit circuit, std::size_t n_samples, std::uint64_t rng_seed,
                         const ProcessNominals& nominals = {});

}  // namespace circuitdiff
