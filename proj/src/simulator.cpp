#include "circuitdiff/simulator.hpp"

#include <cmath>
#include <numbers>

#include "circuitdiff/error.hpp"

namespace circuitdiff {

namespace {

constexpr int kMaxResample = 100;

double positive_gaussian(std::mt19937_64& rng, double nominal) {
    std::normal_distribution<double> dist(nominal, kRelativeSigma * nominal);
    for (int attempt = 0; attempt < kMaxResample; ++attempt) {
        const double v = dist(rng);
        if (v > 0.0) return v;
    }
    throw Error(ErrorKind::DegenerateSampler, "no positive draw after 100 attempts");
}

DeviceParams sample_device(std::mt19937_64& rng, const DeviceNominals& n) {
    DeviceParams d{};
    d.length = positive_gaussian(rng, n.length);
    d.width = positive_gaussian(rng, n.width);
    d.tox_e = positive_gaussian(rng, n.tox_e);
    d.tox_nom = positive_gaussian(rng, n.tox_nom);
    d.xj = positive_gaussian(rng, n.xj);
    d.ndep = positive_gaussian(rng, n.ndep);
    return d;
}

bool device_positive(const DeviceParams& d) noexcept {
    return d.length > 0 && d.width > 0 && d.tox_e > 0 && d.tox_nom > 0 && d.xj > 0 && d.ndep > 0;
}

void validate_device(const DeviceNominals& d, const char* which) {
    if (!(d.length > 0 && d.width > 0 && d.tox_e > 0 && d.tox_nom > 0 && d.xj > 0 && d.ndep > 0)) {
        throw Error(ErrorKind::InvalidConfig, std::string(which) + " nominals must be strictly positive");
    }
}

}  // namespace

void ProcessNominals::validate() const {
    validate_device(nmos, "nmos");
    validate_device(pmos, "pmos");
    if (!(vdd > 0 && c_load > 0 && vth0 > 0)) {
        throw Error(ErrorKind::InvalidConfig, "vdd, c_load and vth0 must be strictly positive");
    }
    if (!(temp_min < temp_max) || temp_min <= -273.15) {
        throw Error(ErrorKind::InvalidConfig, "temperature range must be ordered and above absolute zero");
    }
}

std::array<double, kInputFeatureCount> PvtSample::to_array() const noexcept {
    return {vdd,         temp,         c_load,      nmos.length, nmos.width,
            nmos.tox_e,  nmos.tox_nom, nmos.xj,     nmos.ndep,   pmos.length,
            pmos.width,  pmos.tox_e,   pmos.tox_nom, pmos.xj,    pmos.ndep};
}

PvtSample PvtSample::from_span(std::span<const double> v) {
    if (v.size() < kInputFeatureCount) throw Error(ErrorKind::ShapeMismatch, "need 15 input features");
    return PvtSample{v[0], v[1], v[2], {v[3], v[4], v[5], v[6], v[7], v[8]},
                     {v[9], v[10], v[11], v[12], v[13], v[14]}};
}

bool PvtSample::in_range(const ProcessNominals& nominals) const noexcept {
    const double lo = nominals.vdd * (1.0 - kSupplySpread);
    const double hi = nominals.vdd * (1.0 + kSupplySpread);
    return vdd >= lo && vdd <= hi && temp >= nominals.temp_min && temp <= nominals.temp_max && c_load > 0 &&
           device_positive(nmos) && device_positive(pmos);
}

GateTopology topology_for(Circuit circuit) {
    // {nmos stack, pmos stack, stages} per observed node.
    switch (circuit) {
        case Circuit::Not: return {circuit, {{1, 1, 1}}};
        case Circuit::Nand2: return {circuit, {{2, 1, 1}, {2, 1, 1}}};
        case Circuit::And2: return {circuit, {{2, 1, 2}, {2, 1, 2}}};
        case Circuit::Nor2: return {circuit, {{1, 2, 1}, {1, 2, 1}}};
        case Circuit::Or2: return {circuit, {{1, 2, 2}, {1, 2, 2}}};
        case Circuit::Xor2: return {circuit, {{2, 2, 2}, {2, 2, 2}}};
        // a.b + c: a and b pass through the series pair, c through the single device.
        case Circuit::AndOr3: return {circuit, {{2, 2, 2}, {2, 2, 2}, {1, 2, 2}}};
        // sum output; a and b traverse both XOR stages, carry-in only the second.
        case Circuit::FullAdder: return {circuit, {{2, 2, 3}, {2, 2, 3}, {2, 2, 2}}};
        // data inputs a, b and select c (select also drives the inverter).
        case Circuit::Mux2: return {circuit, {{2, 2, 2}, {2, 2, 2}, {2, 2, 3}}};
        case Circuit::Nand3: return {circuit, {{3, 1, 1}, {3, 1, 1}, {3, 1, 1}}};
        case Circuit::And3: return {circuit, {{3, 1, 2}, {3, 1, 2}, {3, 1, 2}}};
        case Circuit::Nor3: return {circuit, {{1, 3, 1}, {1, 3, 1}, {1, 3, 1}}};
    }
    throw Error(ErrorKind::UnknownCircuit, "no topology for circuit");
}

PvtSample sample_pvt(const ProcessNominals& nominals, std::mt19937_64& rng) {
    PvtSample s{};
    std::uniform_real_distribution<double> vdd(nominals.vdd * (1.0 - kSupplySpread),
                                               nominals.vdd * (1.0 + kSupplySpread));
    std::uniform_real_distribution<double> temp(nominals.temp_min, nominals.temp_max);
    s.vdd = vdd(rng);
    s.temp = temp(rng);
    s.c_load = positive_gaussian(rng, nominals.c_load);
    s.nmos = sample_device(rng, nominals.nmos);
    s.pmos = sample_device(rng, nominals.pmos);
    return s;
}

PvtSample sample_pvt(const ProcessNominals& nominals, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return sample_pvt(nominals, rng);
}

PvtSample nominal_pvt(const ProcessNominals& n) {
    auto dev = [](const DeviceNominals& d) {
        return DeviceParams{d.length, d.width, d.tox_e, d.tox_nom, d.xj, d.ndep};
    };
    return PvtSample{n.vdd, 27.0, n.c_load, dev(n.nmos), dev(n.pmos)};
}

double drive_current(const DeviceParams& dev, const DeviceNominals& nominal, double vdd, double temp,
                     double vth0, const OracleConstants& k) {
    constexpr double kKelvin = 273.15;
    const double mobility = std::pow((temp + kKelvin) / (k.t_ref_celsius + kKelvin), -1.5);
    const double vth = (vth0 - k.vth_temp_coeff * (temp - k.t_ref_celsius)) * std::pow(dev.ndep / nominal.ndep, 0.1) *
                       std::pow(nominal.xj / dev.xj, 0.05);
    const double overdrive = vdd - vth;
    if (!(overdrive > 0.0)) {
        throw Error(ErrorKind::NonconductingDevice, "Vdd does not exceed the effective threshold voltage");
    }
    return k.k_drive * mobility * (dev.width / dev.length) * (nominal.tox_nom / dev.tox_e) *
           std::pow(overdrive, k.alpha);
}

std::vector<double> delay_oracle(const GateTopology& topology, const PvtSample& pvt,
                                 const ProcessNominals& nominals, const OracleConstants& k) {
    const double id_n = drive_current(pvt.nmos, nominals.nmos, pvt.vdd, pvt.temp, nominals.vth0, k);
    const double id_p = drive_current(pvt.pmos, nominals.pmos, pvt.vdd, pvt.temp, nominals.vth0, k);
    const double charge = std::numbers::ln2 * pvt.c_load * pvt.vdd;

    std::vector<double> delays;
    delays.reserve(topology.nodes.size() * 2);
    for (const auto& node : topology.nodes) {
        const double lh = node.stages * charge / (2.0 * id_p / node.pmos_stack);
        const double hl = node.stages * charge / (2.0 * id_n / node.nmos_stack);
        delays.push_back(lh);
        delays.push_back(hl);
    }
    return delays;
}

std::mt19937_64 row_stream(std::uint64_t seed, std::uint64_t row) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32)};
    return std::mt19937_64(seq);
}

Dataset generate_dataset(Circuit circuit, std::size_t n_samples, std::uint64_t rng_seed,
                         const ProcessNominals& nominals) {
    if (n_samples < 1) throw Error(ErrorKind::InvalidConfig, "n_samples must be at least 1");
    nominals.validate();
    const auto schema = schema_for(circuit);
    const auto topology = topology_for(circuit);
    std::vector<double> values;
    values.reserve(n_samples * schema.feature_count());
    for (std::size_t r = 0; r < n_samples; ++r) {
        auto rng = row_stream(rng_seed, r);
        const auto pvt = sample_pvt(nominals, rng);
        const auto inputs = pvt.to_array();
        values.insert(values.end(), inputs.begin(), inputs.end());
        const auto delays = delay_oracle(topology, pvt, nominals);
        values.insert(values.end(), delays.begin(), delays.end());
    }
    return Dataset(schema, std::move(values));
}

}  // namespace circuitdiff
