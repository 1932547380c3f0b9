#include "cdgps/error_models.hpp"

#include "cdgps/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace cdgps::errors {

using namespace constants;

RngStreams::RngStreams(std::uint64_t seed) {
  for (std::size_t k = 0; k < engines_.size(); ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), 0x5eedu};
    engines_[k].seed(seq);
  }
}

std::mt19937_64& RngStreams::stream(Stream s) {
  return engines_[static_cast<std::size_t>(s) % engines_.size()];
}

// Box-Muller on raw engine output keeps draws identical across standard
// library implementations.
double RngStreams::normal(Stream s, double sigma) {
  auto& eng = stream(s);
  const double u1 = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double RngStreams::uniform(Stream s, double lo, double hi) {
  const double u = static_cast<double>(stream(s)() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

LinkBudget LinkBudget::leo() { return {}; }

LinkBudget LinkBudget::geo() {
  LinkBudget b;
  b.gps_antenna_gain = -3.0;
  b.slant_range_km = 80'000.0;
  return b;
}

double LinkBudget::gps_eirp() const {
  return gps_transmit_power + gps_transmit_loss + gps_antenna_gain;
}

double free_space_path_loss(double range_km, double freq_mhz) {
  if (!(range_km > 0.0) || !(freq_mhz > 0.0)) throw Error("path loss needs positive inputs");
  const double lambda = kSpeedOfLight / (freq_mhz * 1e6);
  return -20.0 * std::log10(4.0 * kPi * range_km * 1e3 / lambda);
}

LinkBudgetRows evaluate(const LinkBudget& b) {
  LinkBudgetRows r;
  r.eirp = b.gps_eirp();
  r.fspl = free_space_path_loss(b.slant_range_km, b.frequency_mhz);
  r.carrier = r.eirp + b.rx_antenna_gain + b.rx_circuit_loss + b.rx_polarization_loss + r.fspl;
  if (b.apply_atmospheric_loss) r.carrier += b.atmospheric_loss;
  r.noise_density = b.noise_spectral_density;
  r.c_n0 = r.carrier - r.noise_density;
  return r;
}

double carrier_to_noise(const LinkBudget& b) { return evaluate(b).c_n0; }

namespace {

double pll_unit(double cn0, double bw, double t) {
  return std::sqrt(bw / cn0 * (1.0 + 1.0 / (2.0 * t * cn0)));
}

double dll_unit(double cn0, const ThermalModel& m) {
  const double d = m.correlator_spacing;
  return std::sqrt(m.dll_bandwidth_hz * d / (2.0 * cn0) *
                   (1.0 + 2.0 / (m.integration_time * (2.0 - d) * cn0)));
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

void ThermalModel::calibrate(double c_n0, double pll_bw, double wavelength, double sigma_code,
                             double sigma_phase) {
  const double cn0 = from_db(c_n0);
  code_gain = sigma_code / (chip_length * dll_unit(cn0, *this));
  phase_gain = sigma_phase / (wavelength / (2.0 * kPi) * pll_unit(cn0, pll_bw, integration_time));
}

ThermalModel ThermalModel::anchored_leo() {
  ThermalModel m;
  m.calibrate(45.0, 15.0, kL1Wavelength, 0.20, 2.0e-3);
  return m;
}

ThermalSigmas thermal_noise_sigmas(double c_n0, double pll_bw, double wavelength,
                                   const ThermalModel& model) {
  if (c_n0 < model.tracking_threshold) {
    throw LossOfLockError("C/N0 " + std::to_string(c_n0) + " dB-Hz below tracking threshold");
  }
  const double cn0 = from_db(c_n0);
  return {model.code_gain * model.chip_length * dll_unit(cn0, model),
          model.phase_gain * wavelength / (2.0 * kPi) *
              pll_unit(cn0, pll_bw, model.integration_time)};
}

void MultipathParams::validate() const {
  if (amplitude_code < 0.0 || amplitude_phase < 0.0) {
    throw Error("multipath amplitudes must be non-negative");
  }
  if (!(size_factor > 0.0)) throw Error("multipath size factor must be positive");
}

double near_field_multipath(double amplitude, double elevation_q) {
  const double c = std::cos(elevation_q);
  return amplitude * c * c;
}

double far_field_multipath(double amplitude, double size_factor, double range,
                           double d_azimuth, double d_elevation) {
  const double den = amplitude * range + 1.0;
  return amplitude / (den * den) *
         std::exp(-(range / size_factor) * (d_azimuth * d_azimuth + d_elevation * d_elevation));
}

double multipath_sigma(const MultipathParams& p, double azimuth_q, double elevation_q,
                       MultipathKind kind) {
  const double a = kind == MultipathKind::kCode ? p.amplitude_code : p.amplitude_phase;
  double s = 0.0;
  if (p.near_field) s += near_field_multipath(a, elevation_q);
  if (p.far_field && p.target_range > 0.0) {
    s += far_field_multipath(a, p.size_factor, p.target_range,
                             wrap_angle(azimuth_q - p.target_azimuth),
                             wrap_angle(elevation_q - p.target_elevation));
  }
  return s;
}

void write_multipath_map(std::ostream& os, const MultipathParams& params, double step_deg) {
  if (!(step_deg > 0.0)) throw Error("multipath map step must be positive");
  params.validate();
  os << "azimuth_deg,elevation_deg,sigma_phase_m\n";
  os.precision(17);
  const int na = static_cast<int>(std::floor(180.0 / step_deg + 1e-9));
  const int ne = static_cast<int>(std::floor(360.0 / step_deg + 1e-9));
  for (int i = 0; i <= na; ++i) {
    const double az = -90.0 + i * step_deg;
    for (int j = 0; j < ne; ++j) {
      const double el = -180.0 + j * step_deg;
      os << az << ',' << el << ','
         << multipath_sigma(params, az * kDeg, el * kDeg, MultipathKind::kPhase) << '\n';
    }
  }
}

double clock_random_walk(double state, double dt, double sigma, RngStreams& rng) {
  if (!(dt > 0.0)) throw Error("clock random walk needs dt > 0");
  if (sigma == 0.0) return state;
  return state + std::sqrt(dt) * rng.normal(RngStreams::Stream::kClock, sigma);
}

KlobucharCoefficients default_klobuchar() {
  return {0.1118e-07, -0.7451e-08, -0.5961e-07, 0.1192e-06,
          0.1167e+06, -0.2294e+06, -0.1311e+06, 0.1049e+07};
}

double klobuchar_delay(const Vec3& receiver_eci, const Vec3& los_eci, double time_of_day,
                       const KlobucharCoefficients& k) {
  const Mat3 to_ecef = orbit::eci_to_ecef(time_of_day);
  const Vec3 r = to_ecef * receiver_eci;
  const Vec3 los = (to_ecef * los_eci).normalized();
  const double lat = std::asin(r.z() / r.norm());
  const double lon = std::atan2(r.y(), r.x());
  const Vec3 up = r.normalized();
  const Vec3 east = Vec3::UnitZ().cross(up).normalized();
  const Vec3 north = up.cross(east);
  const double el = std::max(0.0, std::asin(std::clamp(los.dot(up), -1.0, 1.0)));
  const double az = std::atan2(los.dot(east), los.dot(north));

  // Semicircle units from here on.
  const double e = el / kPi;
  const double psi = 0.0137 / (e + 0.11) - 0.022;
  const double phi_i = std::clamp(lat / kPi + psi * std::cos(az), -0.416, 0.416);
  const double lam_i = lon / kPi + psi * std::sin(az) / std::cos(phi_i * kPi);
  const double phi_m = phi_i + 0.064 * std::cos((lam_i - 1.617) * kPi);
  double t = std::fmod(4.32e4 * lam_i + time_of_day, 86400.0);
  if (t < 0.0) t += 86400.0;
  const double f = 1.0 + 16.0 * std::pow(0.53 - e, 3);
  double amp = k[0] + phi_m * (k[1] + phi_m * (k[2] + phi_m * k[3]));
  double per = k[4] + phi_m * (k[5] + phi_m * (k[6] + phi_m * k[7]));
  amp = std::max(amp, 0.0);
  per = std::max(per, 72000.0);
  const double x = 2.0 * kPi * (t - 50400.0) / per;
  double delay = 5e-9;
  if (std::abs(x) < 1.57) delay += amp * (1.0 - x * x / 2.0 + x * x * x * x / 24.0);
  return kSpeedOfLight * f * delay;
}

Vec3 roe_rtn_error(const RoeVector& roe, double a, double u) {
  const auto [da, dl, dex, dey, dix, diy] = roe;
  const double c = std::cos(u), s = std::sin(u);
  return a * Vec3(da - dex * c - dey * s,
                  -1.5 * da * u + dl + 2.0 * dex * s - 2.0 * dey * c,
                  dix * s - diy * c);
}

double roe_rms(const RoeVector& roe, double a) {
  constexpr int kSamples = 3600;
  double acc = 0.0;
  for (int k = 0; k < kSamples; ++k) {
    acc += roe_rtn_error(roe, a, 2.0 * kPi * k / kSamples).squaredNorm();
  }
  return std::sqrt(acc / kSamples);
}

RoeError calibrate_roe(RoeVector pattern, double a, double target_rms) {
  pattern[0] = 0.0;
  const double rms = roe_rms(pattern, a);
  RoeError out;
  out.target_rms = target_rms;
  if (rms == 0.0) return out;
  for (std::size_t k = 0; k < pattern.size(); ++k) out.roe[k] = pattern[k] * target_rms / rms;
  return out;
}

RoeError random_roe_error(RngStreams& rng, double a, double target_rms) {
  RoeVector pattern{};
  for (std::size_t k = 1; k < pattern.size(); ++k) {
    pattern[k] = rng.normal(RngStreams::Stream::kEphemeris);
  }
  return calibrate_roe(pattern, a, target_rms);
}

Vec3 inject_roe_error(const KeplerElements& eph, const RoeError& roe, double t) {
  const OrbitState s = orbit::kepler_to_state(eph, t);
  const Mat3 rtn = orbit::rtn_frame(s);
  // Argument of latitude measured from the ascending node.
  const Vec3 node = Vec3::UnitZ().cross(s.position.cross(s.velocity));
  const Vec3 n_hat = node.norm() > 1e-9 ? node.normalized() : Vec3::UnitX();
  const Vec3 m_hat = s.position.cross(s.velocity).normalized().cross(n_hat);
  const double u = std::atan2(s.position.dot(m_hat), s.position.dot(n_hat));
  return s.position + rtn.transpose() * roe_rtn_error(roe.roe, eph.a, u);
}

}  // namespace cdgps::errors
