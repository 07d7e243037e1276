#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spinterface/spectra.hpp"
#include "spinterface/units.hpp"

using namespace spinterface;

namespace {

constexpr double kGyro = constants::mu_bohr_ghz_per_tesla;

SpinSystem make_sys(double d, double e, double g = 2.0) {
  SpinSystem sys;
  sys.zfs_d_ghz = d;
  sys.zfs_e_ghz = e;
  sys.g_factor = g;
  return sys;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

double spectrum_fwhm(const Spectrum& s) {
  const double peak = *std::max_element(s.values.begin(), s.values.end());
  double lo = s.axis.front(), hi = s.axis.back();
  for (size_t i = 0; i < s.values.size(); ++i)
    if (s.values[i] >= peak / 2.0) {
      lo = s.axis[i];
      break;
    }
  for (size_t i = s.values.size(); i-- > 0;)
    if (s.values[i] >= peak / 2.0) {
      hi = s.axis[i];
      break;
    }
  return hi - lo;
}

}  // namespace

TEST_CASE("odmr map: zero-field column peaks at D") {
  const auto grid_f = linspace(3.0, 4.3, 261);
  const auto map = odmr_map(make_sys(3.63, 0.0), OpticalModel{}, Eigen::Vector3d::UnitZ(),
                            {0.0}, grid_f, LineShape{LineShape::Kind::lorentzian, 0.01, false},
                            5.0);
  int argmax = 0;
  for (int j = 0; j < map.contrast.cols(); ++j)
    if (map.contrast(0, j) > map.contrast(0, argmax)) argmax = j;
  CHECK(grid_f[argmax] == doctest::Approx(3.63).epsilon(1e-9));
}

TEST_CASE("odmr map: ridge positions follow the linear fan") {
  // keep both ridges (3.63 -+ 2 gamma B) inside the frequency grid
  const auto grid_b = linspace(0.0, 20.0, 41);
  const auto grid_f = linspace(3.0, 4.3, 521);  // 2.5 MHz step
  const double step_f = grid_f[1] - grid_f[0];
  const auto map = odmr_map(make_sys(3.63, 0.0), OpticalModel{}, Eigen::Vector3d::UnitZ(),
                            grid_b, grid_f,
                            LineShape{LineShape::Kind::lorentzian, 0.01, false}, 5.0);
  for (int ib = 0; ib < static_cast<int>(grid_b.size()); ++ib) {
    const double zeeman = 2.0 * kGyro * grid_b[ib] * 1e-3;
    for (double target : {3.63 - zeeman, 3.63 + zeeman}) {
      // local argmax within +-10 grid steps of the expected ridge
      int j0 = static_cast<int>(std::round((target - grid_f.front()) / step_f));
      int best = std::max(0, j0 - 10);
      for (int j = best; j <= std::min<int>(grid_f.size() - 1, j0 + 10); ++j)
        if (map.contrast(ib, j) > map.contrast(ib, best)) best = j;
      CHECK(std::abs(grid_f[best] - target) <= step_f + 1e-12);
    }
  }
}

TEST_CASE("odmr map: empty grid rejected") {
  CHECK_THROWS_AS(odmr_map(make_sys(3.63, 0.0), OpticalModel{}, Eigen::Vector3d::UnitZ(), {},
                           {3.63}, LineShape{}, 5.0),
                  std::domain_error);
  CHECK_THROWS_AS(odmr_map(make_sys(3.63, 0.0), OpticalModel{}, Eigen::Vector3d::UnitZ(),
                           {0.0}, {}, LineShape{}, 5.0),
                  std::domain_error);
}

TEST_CASE("resonance fields: free-spin X-band line") {
  const auto res =
      resonance_fields(make_sys(0.0, 0.0), 9.4, Eigen::Vector3d::UnitZ(), 600.0, 77.0);
  // drop the dark double-quantum branch, keep allowed lines only
  std::vector<double> fields;
  for (const auto& r : res)
    if (r.intensity > 1e-8) fields.push_back(r.b_mt);
  REQUIRE(!fields.empty());
  // h f / (g mu_B) = 9.4 / (2 * 13.996) in Tesla
  const double expected_mt = 9.4 / (2.0 * kGyro) * 1e3;
  for (double b : fields) {
    CHECK(b == doctest::Approx(expected_mt).epsilon(1e-5));
    CHECK(b == doctest::Approx(335.80).epsilon(1e-3));
  }
}

TEST_CASE("resonance fields: two branches for D = 3.63") {
  const auto res =
      resonance_fields(make_sys(3.63, 0.0), 9.4, Eigen::Vector3d::UnitZ(), 600.0, 77.0);
  std::vector<double> fields;
  for (const auto& r : res)
    if (r.intensity > 1e-8) fields.push_back(r.b_mt);
  REQUIRE(fields.size() == 2);
  CHECK(fields[0] == doctest::Approx((9.4 - 3.63) / (2.0 * kGyro) * 1e3).epsilon(1e-4));
  CHECK(fields[1] == doctest::Approx((9.4 + 3.63) / (2.0 * kGyro) * 1e3).epsilon(1e-4));
  CHECK(fields[0] == doctest::Approx(206.13).epsilon(1e-3));
  CHECK(fields[1] == doctest::Approx(465.48).epsilon(1e-3));
}

TEST_CASE("resonance fields: substituting the root back reproduces f_mw") {
  const auto sys = make_sys(3.63, 0.2);
  const Eigen::Vector3d axis = Eigen::Vector3d(1, 2, 3).normalized();
  const auto res = resonance_fields(sys, 9.4, axis, 600.0, 77.0);
  REQUIRE(!res.empty());
  for (const auto& r : res) {
    FieldPoint field;
    field.b0_tesla = axis * (r.b_mt * 1e-3);
    const auto table = transition_table(sys, field, 77.0);
    double best = 1e9;
    for (const auto& t : table) best = std::min(best, std::abs(t.frequency_ghz - 9.4));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("resonance fields: empty when f_mw is unreachable") {
  // for D = 8 within 10 mT every branch stays below 0.6 GHz or above 7 GHz
  const auto res =
      resonance_fields(make_sys(8.0, 0.0), 1.0, Eigen::Vector3d::UnitZ(), 10.0, 77.0);
  CHECK(res.empty());
}

TEST_CASE("cw-ESR: derivative spectrum integrates to ~0") {
  // grid fine enough that trapezoid error is below the cancellation being tested
  const auto grid = linspace(0.0, 600.0, 30001);
  const auto spec = cw_esr_spectrum(make_sys(3.63, 0.0), 9.4, grid,
                                    LineShape{LineShape::Kind::lorentzian, 0.5, true}, 77.0,
                                    SingleOrientation{});
  double integral = 0.0, abs_integral = 0.0;
  for (size_t i = 1; i < spec.values.size(); ++i) {
    const double seg = 0.5 * (grid[i] - grid[i - 1]);
    integral += seg * (spec.values[i] + spec.values[i - 1]);
    abs_integral += seg * (std::abs(spec.values[i]) + std::abs(spec.values[i - 1]));
  }
  CHECK(std::abs(integral) < 1e-5 * abs_integral);
}

TEST_CASE("cw-ESR: single orientation lines sit at the resonance fields") {
  const auto grid = linspace(0.0, 600.0, 6001);
  const auto spec = cw_esr_spectrum(make_sys(3.63, 0.0), 9.4, grid,
                                    LineShape{LineShape::Kind::lorentzian, 0.5, false}, 77.0,
                                    SingleOrientation{});
  // local maxima above a tenth of the global peak
  const double vmax = *std::max_element(spec.values.begin(), spec.values.end());
  std::vector<double> peaks;
  for (size_t i = 1; i + 1 < spec.values.size(); ++i)
    if (spec.values[i] > spec.values[i - 1] && spec.values[i] >= spec.values[i + 1] &&
        spec.values[i] > 0.1 * vmax)
      peaks.push_back(grid[i]);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0] == doctest::Approx(206.13).epsilon(1e-2));
  CHECK(peaks[1] == doctest::Approx(465.48).epsilon(1e-2));
}

TEST_CASE("cw-ESR: isotropic powder equals the single orientation") {
  const auto grid = linspace(300.0, 370.0, 701);
  const LineShape line{LineShape::Kind::lorentzian, 0.5, false};
  const auto single =
      cw_esr_spectrum(make_sys(0.0, 0.0), 9.4, grid, line, 77.0, SingleOrientation{});
  const auto powder =
      cw_esr_spectrum(make_sys(0.0, 0.0), 9.4, grid, line, 77.0, PowderAverage{64});
  for (size_t i = 0; i < grid.size(); ++i)
    CHECK(single.values[i] == doctest::Approx(powder.values[i]).epsilon(1e-6));
}

TEST_CASE("cw-ESR: invalid orientation count rejected") {
  CHECK_THROWS_AS(cw_esr_spectrum(make_sys(0.0, 0.0), 9.4, {100.0, 200.0}, LineShape{}, 77.0,
                                  PowderAverage{0}),
                  std::domain_error);
}

TEST_CASE("cw-ESR: powder average is converged at moderate orientation counts") {
  const auto grid = linspace(150.0, 550.0, 401);
  const LineShape line{LineShape::Kind::lorentzian, 5.0, false};
  const auto sys = make_sys(3.63, 0.2);
  const auto a = cw_esr_spectrum(sys, 9.4, grid, line, 77.0, PowderAverage{2000});
  const auto b = cw_esr_spectrum(sys, 9.4, grid, line, 77.0, PowderAverage{4000});
  double rms = 0.0, scale = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    rms += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    scale += b.values[i] * b.values[i];
  }
  CHECK(std::sqrt(rms / scale) < 0.01);
}

TEST_CASE("zeeman PL: zero field gives an identically zero differential") {
  OpticalModel optical;
  const auto grid = linspace(1022.0, 1028.0, 601);
  const auto [pl, diff] = zeeman_pl_spectrum(make_sys(3.63, 0.0), optical, 0.0, grid,
                                             LineShape{LineShape::Kind::gaussian, 60.0, false});
  for (double v : diff.values) CHECK(v == 0.0);
  for (double v : pl.values) CHECK(v >= 0.0);
}

TEST_CASE("zeeman PL: 9 T differential flanks at +-0.883 nm with a central dip") {
  OpticalModel optical;  // defaults: 1025 nm ZPL
  const auto grid = linspace(1022.0, 1028.0, 2401);  // 2.5 pm step
  const auto [pl, diff] = zeeman_pl_spectrum(make_sys(3.63, 0.0), optical, 9.0, grid,
                                             LineShape{LineShape::Kind::gaussian, 60.0, false});
  // flank = argmax left/right of the ZPL
  double left_peak = 0, left_pos = 0, right_peak = 0, right_pos = 0, center = 0;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1025.0 && diff.values[i] > left_peak) {
      left_peak = diff.values[i];
      left_pos = grid[i];
    }
    if (grid[i] > 1025.0 && diff.values[i] > right_peak) {
      right_peak = diff.values[i];
      right_pos = grid[i];
    }
    if (std::abs(grid[i] - 1025.0) < 1.3e-3) center = diff.values[i];
  }
  const double shift = 1025.0 * 1025.0 * 2.0 * kGyro * 9.0 / constants::speed_of_light_nm_ghz;
  CHECK(shift == doctest::Approx(0.883).epsilon(2e-3));
  CHECK(std::abs((1025.0 - left_pos) - shift) < 0.01);
  CHECK(std::abs((right_pos - 1025.0) - shift) < 0.01);
  CHECK(center < 0.0);
}

TEST_CASE("zeeman PL: grid not covering the lines sets a warning") {
  OpticalModel optical;
  const auto grid = linspace(1024.9, 1025.1, 51);  // lines at +-0.88 nm fall outside
  const auto [pl, diff] = zeeman_pl_spectrum(make_sys(3.63, 0.0), optical, 9.0, grid,
                                             LineShape{LineShape::Kind::gaussian, 60.0, false});
  bool warned = false;
  for (const auto& [k, v] : pl.metadata)
    if (k == "warning") warned = true;
  CHECK(warned);
}

TEST_CASE("PLE profile: unit peak and 150 GHz width") {
  OpticalModel optical;
  optical.inhomogeneous_fwhm_ghz = 150.0;
  const auto grid = linspace(-300.0, 300.0, 6001);
  const auto spec = ple_profile(optical, grid);
  const size_t mid = grid.size() / 2;
  CHECK(spec.values[mid] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(spectrum_fwhm(spec) == doctest::Approx(150.0).epsilon(1e-2));
  // half maximum at exactly +-75 GHz
  const auto at = [&](double x) {
    const size_t i = static_cast<size_t>(std::round((x - grid.front()) / 0.1));
    return spec.values[i];
  };
  CHECK(at(75.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(at(-75.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("fluorescence narrowing: resonant subensemble is narrower") {
  OpticalModel optical;
  optical.inhomogeneous_fwhm_ghz = 150.0;
  optical.homogeneous_fwhm_ghz = 1.0;
  const auto grid = linspace(-300.0, 300.0, 12001);
  const auto narrow = fluorescence_profile(optical, grid, true);
  const auto broad = fluorescence_profile(optical, grid, false);
  CHECK(spectrum_fwhm(narrow) < spectrum_fwhm(broad));
  CHECK(spectrum_fwhm(narrow) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(spectrum_fwhm(broad) == doctest::Approx(150.0).epsilon(0.01));
}

TEST_CASE("non-derivative spectra are non-negative") {
  const auto grid = linspace(0.0, 600.0, 601);
  const auto esr = cw_esr_spectrum(make_sys(3.63, 0.1), 9.4, grid,
                                   LineShape{LineShape::Kind::lorentzian, 1.0, false}, 77.0,
                                   PowderAverage{32});
  for (double v : esr.values) CHECK(v >= 0.0);
}

TEST_CASE("polarization response: cos^2 with 180 degree period") {
  CHECK(polarization_response(0.0) == doctest::Approx(1.0));
  CHECK(polarization_response(90.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(polarization_response(180.0) == doctest::Approx(1.0));
  CHECK(polarization_response(45.0) == doctest::Approx(0.5));
}

TEST_CASE("optical model invariants") {
  OpticalModel ok;
  CHECK_NOTHROW(ok.validate());
  OpticalModel bad = ok;
  bad.branching = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.debye_waller = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.homogeneous_fwhm_ghz = 2.0 * ok.inhomogeneous_fwhm_ghz;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
