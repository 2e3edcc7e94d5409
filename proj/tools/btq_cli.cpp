// btq: batch command-line front end for the quantization library.
//
// Subcommands
//   verify     seeded identity regression across the kernel calculus,
//              transport factors, and fixed-point coefficients
//   transport  scalar factor, canonical-frame determinants, and kernel
//              identity residuals along one structure path
//   coeff      fixed-point leading coefficient of a symplectic 2x2 map,
//              cross-checked against the Gaussian integral
//   trace      torus trace study of a quantized integral map vs. the
//              fixed-point prediction, per level p
//   approx     deviation of torus parallel transport from the
//              coefficient-weighted projector pairing
//   oracle     torus self-checks: Gram closed form, grid refinement,
//              projector identity, transport unitarity
//
// Reports are JSON (UTF-8, keys sorted; `timing_seconds` is the only field
// that varies between identical runs) or CSV (header row, LF line ends,
// shortest round-trip doubles). With --out the report goes to the file and
// stdout carries a one-line summary; without it the report goes to stdout
// and the summary to stderr. Exit codes: 0 all asserted tolerances met,
// 1 numerical failure, 2 usage error.

#include <btq/fixed_point.hpp>
#include <btq/torus.hpp>
#include <btq/version.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace btq;
using nlohmann::json;

namespace {

// ------------------------------------------------------------- formatting

std::string fmt_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (size_t i = 0; i < header.size(); ++i)
    out += (i ? "," : "") + csv_field(header[i]);
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- parsing

double parse_double(const std::string& s) {
  double v = 0.0;
  const bool plus = !s.empty() && s.front() == '+';  // from_chars rejects '+'
  const char* b = s.data() + (plus ? 1 : 0);
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  require(b != e && res.ec == std::errc() && res.ptr == e, ErrorKind::UsageError,
          "cannot parse number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Complex literals of the form `re+imi`: "0+1i", "0.3-0.8i", "2i", "i", "1.5".
cplx parse_complex(const std::string& raw) {
  std::string s;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  require(!s.empty(), ErrorKind::UsageError, "empty complex literal");
  if (s.back() != 'i') return cplx(parse_double(s), 0.0);
  s.pop_back();
  size_t splitpos = std::string::npos;
  for (size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      splitpos = k;
      break;
    }
  }
  std::string re = "0", im = s;
  if (splitpos != std::string::npos) {
    re = s.substr(0, splitpos);
    im = s.substr(splitpos);
  }
  double imv = 1.0;
  if (im == "" || im == "+") {
    imv = 1.0;
  } else if (im == "-") {
    imv = -1.0;
  } else {
    imv = parse_double(im);
  }
  return cplx(parse_double(re), imv);
}

Mat parse_map(const std::string& s) {
  const auto parts = split(s, ',');
  require(parts.size() == 4, ErrorKind::UsageError,
          "--map wants four comma-separated entries a,b,c,d (row-major)");
  Mat A(2, 2);
  A << parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2]),
      parse_double(parts[3]);
  return A;
}

std::array<double, 2> parse_shift(const std::string& s) {
  const auto parts = split(s, ',');
  require(parts.size() == 2, ErrorKind::UsageError,
          "--shift wants two comma-separated entries");
  return {parse_double(parts[0]), parse_double(parts[1])};
}

// Path descriptors: scaling:<s> | segment:<tau0>,<tau1> | file:<knots>.
struct PathSpec {
  enum class Kind { Scaling, Segment, File } kind = Kind::Segment;
  double s = 1.0;                      // scaling rate
  cplx tau0{0.0, 1.0}, tau1{0.0, 2.0}; // segment endpoints
  std::string file;                    // knot file
  StructurePath path;
  std::string text;  // canonical echo
};

PathSpec parse_path(const std::string& s) {
  PathSpec out;
  out.text = s;
  const auto colon = s.find(':');
  require(colon != std::string::npos, ErrorKind::UsageError,
          "--path wants scaling:<s>, segment:<tau0>,<tau1>, or file:<path>");
  const std::string head = s.substr(0, colon), body = s.substr(colon + 1);
  if (head == "scaling") {
    out.kind = PathSpec::Kind::Scaling;
    out.s = parse_double(body);
    out.path = StructurePath::diagonal_scaling(1, out.s);
  } else if (head == "segment") {
    out.kind = PathSpec::Kind::Segment;
    const auto parts = split(body, ',');
    require(parts.size() == 2, ErrorKind::UsageError,
            "segment path wants two endpoints tau0,tau1");
    out.tau0 = parse_complex(parts[0]);
    out.tau1 = parse_complex(parts[1]);
    out.path = StructurePath::upper_half_segment(out.tau0, out.tau1);
  } else if (head == "file") {
    out.kind = PathSpec::Kind::File;
    out.file = body;
    std::ifstream f(body);
    require(bool(f), ErrorKind::UsageError, "cannot open knot file " + body);
    std::vector<std::pair<double, Mat>> knots;
    std::string line;
    int twon = 0;
    while (std::getline(f, line)) {
      std::istringstream ls(line);
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      if (vals.empty()) continue;
      if (twon == 0) {
        const int m = static_cast<int>(std::lround(std::sqrt(double(vals.size() - 1))));
        require(m >= 2 && m % 2 == 0 && size_t(m) * size_t(m) + 1 == vals.size(),
                ErrorKind::UsageError,
                "knot rows must be `t` followed by a square matrix, row-major");
        twon = m;
      }
      require(vals.size() == size_t(twon) * size_t(twon) + 1, ErrorKind::UsageError,
              "inconsistent knot row length");
      Mat J(twon, twon);
      for (int i = 0; i < twon; ++i)
        for (int j = 0; j < twon; ++j) J(i, j) = vals[1 + i * twon + j];
      knots.emplace_back(vals[0], J);
    }
    out.path = StructurePath::sampled(knots);
  } else {
    fail(ErrorKind::UsageError, "unknown path kind '" + head + "'");
  }
  return out;
}

// --------------------------------------------------------------- reporting

struct CheckList {
  json records = json::array();
  int failures = 0;
  int total = 0;

  void add(const std::string& name, double measured, double tol) {
    const bool ok = measured <= tol;
    json r;
    r["name"] = name;
    r["measured"] = measured;
    r["tolerance"] = tol;
    r["pass"] = ok;
    records.push_back(std::move(r));
    ++total;
    failures += ok ? 0 : 1;
  }

  bool all_pass() const { return failures == 0; }

  std::string csv() const {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : records)
      rows.push_back({r["name"].get<std::string>(),
                      fmt_double(r["measured"].get<double>()),
                      fmt_double(r["tolerance"].get<double>()),
                      r["pass"].get<bool>() ? "true" : "false"});
    return csv_table({"name", "measured", "tolerance", "pass"}, rows);
  }
};

struct Options {
  std::string map_csv, tau_str = "0+1i", path_str, plist_str, shift_csv, out_path;
  int pmax = 0;
  int grid = 0;
  int steps = 0;
  double tol = 0.0;
  double t = 1.0;
  std::uint64_t seed = 0;
  bool want_json = false;
  bool want_csv = false;

  PathDiscretization disc() const {
    PathDiscretization d;
    if (steps > 0) d.steps = steps;
    if (tol > 0.0) d.tol = tol;
    return d;
  }

  // --plist takes precedence over --pmax, so a command-line list overrides
  // a pmax taken from a config file.
  std::vector<int> p_list(std::vector<int> fallback) const {
    if (!plist_str.empty()) {
      std::vector<int> out;
      for (const auto& tok : split(plist_str, ',')) {
        const double v = parse_double(tok);
        require(v >= 1.0 && v == std::floor(v), ErrorKind::UsageError,
                "--plist wants positive integers");
        out.push_back(static_cast<int>(v));
      }
      return out;
    }
    if (pmax > 0) {
      require(pmax >= 4, ErrorKind::UsageError, "--pmax must be at least 4");
      std::vector<int> out;
      for (int p = 4; p <= pmax; p += 4) out.push_back(p);
      return out;
    }
    return fallback;
  }
};

json config_echo(const Options& opt, const std::string& format) {
  json c;
  if (!opt.map_csv.empty()) c["map"] = opt.map_csv;
  c["tau"] = opt.tau_str;
  if (!opt.path_str.empty()) c["path"] = opt.path_str;
  if (!opt.plist_str.empty()) c["plist"] = opt.plist_str;
  if (opt.pmax > 0) c["pmax"] = opt.pmax;
  if (!opt.shift_csv.empty()) c["shift"] = opt.shift_csv;
  c["grid"] = opt.grid;
  c["steps"] = opt.disc().steps;
  c["tol"] = opt.disc().tol;
  c["seed"] = opt.seed;
  c["t"] = opt.t;
  c["format"] = format;
  if (!opt.out_path.empty()) c["out"] = opt.out_path;
  return c;
}

struct Report {
  json payload;
  std::string csv;
  std::string summary;
  bool all_pass = true;
};

int emit(const Options& opt, Report&& rep, double seconds) {
  rep.payload["timing_seconds"] = seconds;
  const std::string body =
      opt.want_csv ? rep.csv : rep.payload.dump(2) + "\n";
  if (!opt.out_path.empty()) {
    std::ofstream f(opt.out_path, std::ios::binary);
    require(bool(f), ErrorKind::UsageError,
            "cannot open output file " + opt.out_path);
    f << body;
    std::cout << rep.summary << "\n";
  } else {
    std::cout << body;
    std::cerr << rep.summary << "\n";
  }
  return rep.all_pass ? 0 : 1;
}

// ------------------------------------------------------- randomized inputs

Vec sample_point(std::mt19937_64& g, int dim, double radius = 1.2) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = u(g);
  return v;
}

Polynomial sample_polynomial(std::mt19937_64& g, int nvars, int max_deg) {
  std::uniform_int_distribution<int> ud(0, max_deg);
  std::uniform_int_distribution<int> uv(0, nvars - 1);
  std::uniform_real_distribution<double> uc(-1.0, 1.0);
  Polynomial p(nvars);
  for (int t = 0; t < 6; ++t) {
    Polynomial::Key k(static_cast<size_t>(nvars), 0);
    const int deg = ud(g);
    for (int d = 0; d < deg; ++d) ++k[static_cast<size_t>(uv(g))];
    p.add_term(k, cplx(uc(g), uc(g)));
  }
  if (p.empty()) p.add_term(Polynomial::Key(static_cast<size_t>(nvars), 0), 1.0);
  return p;
}

Mat sample_nondegenerate_symplectic(std::mt19937_64& g, int n, double scale) {
  for (int tries = 0; tries < 64; ++tries) {
    const Mat S = random_symplectic(g, n, scale);
    Eigen::JacobiSVD<Mat> svd(Mat(Mat::Identity(2 * n, 2 * n) - S));
    if (svd.singularValues().minCoeff() > 0.05) return S;
  }
  fail(ErrorKind::ConvergenceFailure, "could not draw a nondegenerate map");
}

StructurePath conjugation_path(const CompatibleStructure& J0, const Mat& dphi) {
  const auto J1 = CompatibleStructure::validate(dphi * J0.J * dphi.inverse());
  if (J0.n == 1) {
    return StructurePath::upper_half_segment(upper_half_parameter(J0),
                                             upper_half_parameter(J1));
  }
  return StructurePath::siegel_segment(siegel_parameter(J0), siegel_parameter(J1));
}

// The regression family of structure paths used by `verify` and the suites.
std::vector<std::pair<std::string, StructurePath>> regression_paths() {
  std::vector<std::pair<std::string, StructurePath>> out;
  out.emplace_back("scaling_n1", StructurePath::diagonal_scaling(1, 1.0));
  out.emplace_back("vertical_segment",
                   StructurePath::upper_half_segment(kI, cplx(0.0, 2.0)));
  out.emplace_back("slanted_segment",
                   StructurePath::upper_half_segment(cplx(0.5, 0.7), cplx(-1.0, 2.2)));
  {
    const auto ref = StructurePath::upper_half_segment(kI, cplx(1.0, 2.0));
    std::vector<std::pair<double, Mat>> knots;
    for (int k = 0; k <= 10; ++k) knots.emplace_back(k / 10.0, ref.J(k / 10.0));
    out.emplace_back("sampled", StructurePath::sampled(knots));
  }
  {
    std::mt19937_64 g(31);
    const Mat S = random_symplectic(g, 1, 0.35);
    out.emplace_back("conjugated",
                     StructurePath::upper_half_segment(kI, cplx(0.4, 1.6)).conjugated(S));
  }
  out.emplace_back("scaling_n2", StructurePath::diagonal_scaling(2, 0.7));
  return out;
}

double rel_residual(cplx got, cplx want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// ----------------------------------------------------------------- verify

Report run_verify(const Options& opt) {
  std::mt19937_64 g(opt.seed);
  CheckList checks;

  // Kernel composition: closed form vs. direct quadrature.
  {
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const auto Kl = kernel_of(random_compatible_structure(g, 1));
      const auto Kr = kernel_of(random_compatible_structure(g, 1));
      const auto C = compose(Kl, Kr);
      for (int pt = 0; pt < 2; ++pt) {
        const Vec Z = sample_point(g, 2), Zp = sample_point(g, 2);
        worst = std::max(
            worst, rel_residual(C(Z, Zp), quadrature_compose(Kl, nullptr, Kr, Z, Zp)));
      }
    }
    checks.add("compose_closed_vs_quadrature_n1", worst, 1e-6);
  }
  {
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const auto Kl = kernel_of(random_compatible_structure(g, 2));
      const auto Kr = kernel_of(random_compatible_structure(g, 2));
      const auto C = compose(Kl, Kr);
      const Vec Z = sample_point(g, 4), Zp = sample_point(g, 4);
      worst = std::max(
          worst, rel_residual(C(Z, Zp), quadrature_compose(Kl, nullptr, Kr, Z, Zp)));
    }
    checks.add("compose_closed_vs_quadrature_n2", worst, 1e-6);
  }
  {
    // Squeeze by 2 against the round structure: the normalization is 4/5.
    Mat G(2, 2);
    G << 0.25, 0.0, 0.0, 4.0;
    const auto K1 = kernel_of(CompatibleStructure::validate(structure_of_metric(G)));
    const auto K0 = kernel_of(CompatibleStructure::standard(1));
    checks.add("compose_worked_normalization",
               std::abs(compose(K1, K0).c - cplx(0.8, 0.0)), 1e-12);
  }

  // Polynomial-weighted composition and anchored quadratic moments.
  {
    double worst = 0.0;
    for (int rep = 0; rep < 2; ++rep) {
      const auto Kl = kernel_of(random_compatible_structure(g, 1));
      const auto Kr = kernel_of(random_compatible_structure(g, 1));
      const Polynomial F = sample_polynomial(g, 2, 4);
      const auto W = compose_poly(Kl, F, Kr);
      const Vec Z = sample_point(g, 2), Zp = sample_point(g, 2);
      worst = std::max(worst,
                       rel_residual(W(Z, Zp), quadrature_compose(Kl, &F, Kr, Z, Zp)));
    }
    checks.add("poly_compose_vs_quadrature", worst, 1e-6);
  }
  {
    double worst = 0.0;
    for (int rep = 0; rep < 2; ++rep) {
      const auto Kl = kernel_of(random_compatible_structure(g, 1));
      const auto Kr = kernel_of(random_compatible_structure(g, 1));
      Mat B(2, 2);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) B(i, j) = u(g);
      B = Mat(0.5 * (B + B.transpose()));
      const Vec Z = sample_point(g, 2), Zp = sample_point(g, 2);
      // Left-anchored weight F(Y) = <B (Z - Y), (Z - Y)> as a polynomial.
      const auto lhs = quadratic_moment(Kl, B.cast<cplx>(), Kr, MomentSide::Left);
      Polynomial F(2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          if (B(i, j) == 0.0) continue;
          const Polynomial di =
              Polynomial::constant(2, Z(i)) - Polynomial::variable(2, i);
          const Polynomial dj =
              Polynomial::constant(2, Z(j)) - Polynomial::variable(2, j);
          F += B(i, j) * (di * dj);
        }
      const auto via_poly = compose_poly(Kl, F, Kr);
      worst = std::max(worst, rel_residual(lhs(Z, Zp), via_poly(Z, Zp)));
    }
    checks.add("quadratic_moment_vs_poly", worst, 1e-10);
  }
  {
    Mat G(2, 2);
    G << 0.25, 0.0, 0.0, 4.0;
    const auto K1 = kernel_of(CompatibleStructure::validate(structure_of_metric(G)));
    const auto K0 = kernel_of(CompatibleStructure::standard(1));
    const auto odd = compose_poly(K1, Polynomial::variable(2, 1).pow(3), K0);
    const Vec zero = Vec::Zero(2);
    checks.add("odd_moment_vanishes_at_origin", std::abs(odd(zero, zero)), 1e-8);
  }

  // Transport factors and kernel identities along the regression paths.
  const auto disc = opt.disc();
  checks.add("transport_scaling_closed_form",
             std::abs(transport_factor(StructurePath::diagonal_scaling(1, 1.0), 1.0,
                                       disc) -
                      cplx(std::sqrt(std::cosh(1.0)), 0.0)),
             1e-8);
  {
    double proj = 0.0, par = 0.0, central = 0.0, norm = 0.0, det_id = 0.0;
    for (const auto& [name, path] : regression_paths()) {
      const int dim = 2 * path.n();
      Vec Z(dim), Zp(dim);
      for (int i = 0; i < dim; ++i) {
        Z(i) = 0.25 - 0.1 * i;
        Zp(i) = -0.05 + 0.12 * i;
      }
      const auto outer = path.n() == 1 ? OuterEvaluation::Quadrature
                                       : OuterEvaluation::ClosedForm;
      const auto r = kernel_identity_residuals(path, 0.6, Z, Zp, disc, {}, outer);
      proj = std::max(proj, r.projected_derivative);
      par = std::max(par, r.parallel_kernel);
      central = std::max(central, r.central_value);
      norm = std::max(norm, r.normalization);
      det_id = std::max(det_id, transport_identity_residual(path, 1.0, disc));
    }
    checks.add("transport_projected_derivative", proj, 1e-5);
    checks.add("transport_parallel_kernel", par, 1e-5);
    checks.add("transport_central_value", central, 1e-7);
    checks.add("transport_normalization", norm, 1e-7);
    checks.add("transport_determinant_identity", det_id, 1e-7);
  }

  // Fixed-point data: canonical-bundle identity, exact reflection values,
  // and the formula against the Gaussian integral.
  {
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const int n = 1 + rep % 2;
      const auto J0 = random_compatible_structure(g, n);
      const Mat dphi = sample_nondegenerate_symplectic(g, n, 0.45);
      const auto fp =
          FixedPointDatum::from_map(dphi, J0, conjugation_path(J0, dphi), 1.0, disc);
      worst = std::max(worst, geometric_identity_check(fp, disc));
    }
    checks.add("canonical_bundle_identity", worst, 1e-6);
  }
  {
    double worst = 0.0;
    for (int n : {1, 2}) {
      const auto J0 = CompatibleStructure::standard(n);
      const Mat R = -Mat::Identity(2 * n, 2 * n);
      const auto fp =
          FixedPointDatum::from_map(R, J0, StructurePath::constant(J0), 1.0, disc);
      const cplx a0 = leading_coeff_isolated(fp).value;
      worst = std::max(worst, std::abs(a0 - cplx(std::pow(2.0, -n), 0.0)));
    }
    checks.add("coeff_reflection_exact", worst, 1e-9);
  }
  {
    // Reject draws whose fixed-point form has a soft direction the fixed
    // integration grid cannot resolve; the formula itself has no such limit.
    double worst = 0.0;
    int done = 0;
    for (int tries = 0; done < 3 && tries < 200; ++tries) {
      const auto J0 = random_compatible_structure(g, 1);
      const Mat dphi = sample_nondegenerate_symplectic(g, 1, 0.3);
      const auto fp =
          FixedPointDatum::from_map(dphi, J0, conjugation_path(J0, dphi), 1.0, disc);
      const CMat W = detail::fixed_point_form(fp);
      Eigen::SelfAdjointEigenSolver<Mat> es(Mat(W.real()));
      if (es.eigenvalues().minCoeff() < 0.02) continue;
      ++done;
      const cplx a0 = leading_coeff_isolated(fp).value;
      QuadratureSpec spec;
      spec.nodes_per_axis = 400;
      worst = std::max(worst, rel_residual(a0, gaussian_fixed_point_oracle(fp, spec)));
    }
    require(done == 3, ErrorKind::ConvergenceFailure,
            "could not draw three well-conditioned fixed-point instances");
    checks.add("coeff_formula_vs_gaussian_integral", worst, 1e-6);
  }

  Report rep;
  rep.payload["command"] = "verify";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["records"] = checks.records;
  rep.payload["summary"] = {{"checks_total", checks.total},
                            {"checks_failed", checks.failures},
                            {"all_pass", checks.all_pass()}};
  rep.payload["version"] = version_string;
  rep.csv = checks.csv();
  rep.all_pass = checks.all_pass();
  std::ostringstream os;
  os << "verify: " << (checks.total - checks.failures) << "/" << checks.total
     << " identity checks " << (checks.all_pass() ? "passed" : "FAILED")
     << " (seed " << opt.seed << ")";
  rep.summary = os.str();
  return rep;
}

// --------------------------------------------------------------- transport

Report run_transport(const Options& opt) {
  require(!opt.path_str.empty(), ErrorKind::UsageError,
          "transport needs --path (scaling:<s>, segment:<tau0>,<tau1>, file:<knots>)");
  const auto spec = parse_path(opt.path_str);
  const auto& path = spec.path;
  const auto disc = opt.disc();
  const double t = opt.t;

  const cplx mu = transport_factor(path, t, disc);
  const auto ct = canonical_transport(path, t, disc);
  const double det_id = transport_identity_residual(path, t, disc);

  const int dim = 2 * path.n();
  Vec Z(dim), Zp(dim);
  for (int i = 0; i < dim; ++i) {
    Z(i) = 0.25 - 0.1 * i;
    Zp(i) = -0.05 + 0.12 * i;
  }
  const auto outer =
      path.n() == 1 ? OuterEvaluation::Quadrature : OuterEvaluation::ClosedForm;
  const double tmid = std::clamp(t, 0.05, 0.95);
  const auto kr = kernel_identity_residuals(path, tmid, Z, Zp, disc, {}, outer);

  CheckList checks;
  checks.add("determinant_identity", det_id, 1e-7);
  checks.add("projected_derivative", kr.projected_derivative, 1e-5);
  checks.add("parallel_kernel", kr.parallel_kernel, 1e-5);
  checks.add("central_value", kr.central_value, 1e-7);
  checks.add("normalization", kr.normalization, 1e-7);

  Report rep;
  rep.payload["command"] = "transport";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["quantities"] = {
      {"mu_re", mu.real()},           {"mu_im", mu.imag()},
      {"abs_mu", std::abs(mu)},       {"tauK_re", ct.tauK.real()},
      {"tauK_im", ct.tauK.imag()},    {"detPiBar_re", ct.detPiBar.real()},
      {"detPiBar_im", ct.detPiBar.imag()}};
  rep.payload["records"] = checks.records;
  rep.payload["summary"] = {{"checks_total", checks.total},
                            {"checks_failed", checks.failures},
                            {"all_pass", checks.all_pass()}};
  rep.payload["version"] = version_string;

  std::vector<std::vector<std::string>> rows = {
      {"mu_re", fmt_double(mu.real())},
      {"mu_im", fmt_double(mu.imag())},
      {"abs_mu", fmt_double(std::abs(mu))},
      {"tauK_re", fmt_double(ct.tauK.real())},
      {"tauK_im", fmt_double(ct.tauK.imag())},
      {"detPiBar_re", fmt_double(ct.detPiBar.real())},
      {"detPiBar_im", fmt_double(ct.detPiBar.imag())}};
  for (const auto& r : checks.records)
    rows.push_back({r["name"].get<std::string>(),
                    fmt_double(r["measured"].get<double>())});
  rep.csv = csv_table({"quantity", "value"}, rows);
  rep.all_pass = checks.all_pass();

  std::ostringstream os;
  os << "transport: mu(" << t << ") = " << fmt_double(mu.real());
  if (std::abs(mu.imag()) > 1e-14) os << (mu.imag() < 0 ? " - " : " + ")
                                      << fmt_double(std::abs(mu.imag())) << "i";
  os << "; " << (checks.total - checks.failures) << "/" << checks.total
     << " identity checks " << (checks.all_pass() ? "passed" : "FAILED");
  rep.summary = os.str();
  return rep;
}

// ------------------------------------------------------------------- coeff

Report run_coeff(const Options& opt) {
  require(!opt.map_csv.empty(), ErrorKind::UsageError, "coeff needs --map a,b,c,d");
  const Mat A = parse_map(opt.map_csv);
  require(is_symplectic(A, 1e-9), ErrorKind::UsageError,
          "--map must have determinant 1");
  const cplx tau = parse_complex(opt.tau_str);
  require(tau.imag() > 0.0, ErrorKind::UsageError, "--tau needs Im tau > 0");
  const auto disc = opt.disc();

  const auto J0 = structure_from_tau(tau);
  const auto path = StructurePath::upper_half_segment(tau, mapped_tau(A, tau));
  const auto fp = FixedPointDatum::from_map(A, J0, path, 1.0, disc);
  const auto report = leading_coeff_isolated(fp);
  const cplx a0 = report.value;
  const double expected_abs =
      1.0 / std::sqrt(std::abs(Mat(Mat::Identity(2, 2) - A).determinant()));
  QuadratureSpec spec;
  spec.nodes_per_axis = 400;
  const cplx oracle = gaussian_fixed_point_oracle(fp, spec);
  const double geo = geometric_identity_check(fp, disc);

  CheckList checks;
  checks.add("formula_vs_gaussian_integral", rel_residual(a0, oracle), 1e-6);
  checks.add("modulus_identity", std::abs(std::abs(a0) - expected_abs), 1e-6);
  checks.add("canonical_bundle_identity", geo, 1e-6);

  Report rep;
  rep.payload["command"] = "coeff";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["quantities"] = {{"a0_re", a0.real()},
                               {"a0_im", a0.imag()},
                               {"abs_a0", std::abs(a0)},
                               {"expected_abs", expected_abs},
                               {"mu_re", fp.mu.real()},
                               {"mu_im", fp.mu.imag()},
                               {"sign_class", report.sign_class}};
  rep.payload["records"] = checks.records;
  rep.payload["summary"] = {{"checks_total", checks.total},
                            {"checks_failed", checks.failures},
                            {"all_pass", checks.all_pass()}};
  rep.payload["version"] = version_string;

  std::vector<std::vector<std::string>> rows = {
      {"a0_re", fmt_double(a0.real())},
      {"a0_im", fmt_double(a0.imag())},
      {"abs_a0", fmt_double(std::abs(a0))},
      {"expected_abs", fmt_double(expected_abs)},
      {"mu_re", fmt_double(fp.mu.real())},
      {"mu_im", fmt_double(fp.mu.imag())},
      {"sign_class", std::to_string(report.sign_class)}};
  for (const auto& r : checks.records)
    rows.push_back({r["name"].get<std::string>(),
                    fmt_double(r["measured"].get<double>())});
  rep.csv = csv_table({"quantity", "value"}, rows);
  rep.all_pass = checks.all_pass();

  std::ostringstream os;
  os << "coeff: a0 = " << fmt_double(a0.real()) << (a0.imag() < 0 ? " - " : " + ")
     << fmt_double(std::abs(a0.imag())) << "i; " << (checks.total - checks.failures)
     << "/" << checks.total << " checks " << (checks.all_pass() ? "passed" : "FAILED");
  rep.summary = os.str();
  return rep;
}

// ------------------------------------------------------------------- trace

Report run_trace(const Options& opt) {
  require(!opt.map_csv.empty(), ErrorKind::UsageError, "trace needs --map a,b,c,d");
  const Mat A = parse_map(opt.map_csv);
  const cplx tau = parse_complex(opt.tau_str);
  require(tau.imag() > 0.0, ErrorKind::UsageError, "--tau needs Im tau > 0");
  const std::array<double, 2> w =
      opt.shift_csv.empty() ? std::array<double, 2>{0.0, 0.0}
                            : parse_shift(opt.shift_csv);
  const auto p_list = opt.p_list({4, 8, 12, 16, 20, 24, 28, 32});
  const auto st = trace_study(A, tau, p_list, w, opt.disc());

  CheckList checks;
  json records = json::array();
  std::vector<std::vector<std::string>> rows;
  double max_resid = 0.0;
  std::vector<double> ps, abs_traces;
  for (const auto& r : st.records) {
    json jr;
    jr["p"] = r.p;
    jr["trace_re"] = r.trace.real();
    jr["trace_im"] = r.trace.imag();
    jr["prediction_re"] = r.prediction.real();
    jr["prediction_im"] = r.prediction.imag();
    jr["residual"] = r.residual;
    records.push_back(std::move(jr));
    rows.push_back({std::to_string(r.p), fmt_double(r.trace.real()),
                    fmt_double(r.trace.imag()), fmt_double(r.prediction.real()),
                    fmt_double(r.prediction.imag()), fmt_double(r.residual)});
    if (!st.fixed_point_free) {
      checks.add("residual_p" + std::to_string(r.p),
                 r.residual / std::max(1.0, std::abs(r.prediction)), 1e-6);
    }
    max_resid = std::max(max_resid, r.residual);
    ps.push_back(double(r.p));
    abs_traces.push_back(std::abs(r.trace));
  }

  json summary;
  summary["component_dimension"] = st.component_dim;
  summary["fixed_point_free"] = st.fixed_point_free;
  summary["max_residual"] = max_resid;
  summary["residual_below_floor"] = st.below_floor;
  if (!st.below_floor) {
    summary["residual_slope"] = st.residual_slope;
    summary["normalized_residual_slope"] = st.normalized_slope;
  }
  bool decay_ok = true;
  if (st.fixed_point_free && ps.size() >= 2) {
    bool positive = true;
    for (double v : abs_traces) positive = positive && v > 0.0;
    if (positive) {
      const double slope = fit_log_slope(ps, abs_traces);
      summary["trace_decay_slope"] = slope;
    }
  }
  summary["checks_total"] = checks.total;
  summary["checks_failed"] = checks.failures;
  summary["all_pass"] = checks.all_pass() && decay_ok;

  Report rep;
  rep.payload["command"] = "trace";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["records"] = records;
  rep.payload["summary"] = summary;
  rep.payload["version"] = version_string;
  rep.csv = csv_table(
      {"p", "Re(trace)", "Im(trace)", "Re(pred)", "Im(pred)", "|residual|"}, rows);
  rep.all_pass = checks.all_pass();

  std::ostringstream os;
  os << "trace: " << st.records.size() << " levels, max |residual| "
     << fmt_double(max_resid);
  if (st.fixed_point_free)
    os << " (fixed-point free: prediction 0)";
  else
    os << "; " << (checks.total - checks.failures) << "/" << checks.total
       << " residuals within tolerance";
  rep.summary = os.str();
  return rep;
}

// ------------------------------------------------------------------ approx

Report run_approx(const Options& opt) {
  cplx tau0(0.0, 1.0), tau1(0.0, 2.0);
  if (!opt.path_str.empty()) {
    const auto spec = parse_path(opt.path_str);
    require(spec.kind == PathSpec::Kind::Segment, ErrorKind::UsageError,
            "approx wants a segment path (segment:<tau0>,<tau1>)");
    tau0 = spec.tau0;
    tau1 = spec.tau1;
  }
  const auto p_list = opt.p_list({4, 8, 16, 32});
  const auto st = approx_study(tau0, tau1, p_list, opt.disc());

  CheckList checks;
  json records = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : st.records) {
    json jr;
    jr["p"] = r.p;
    jr["deviation"] = r.deviation;
    jr["control"] = r.control;
    records.push_back(std::move(jr));
    rows.push_back({std::to_string(r.p), fmt_double(r.deviation),
                    fmt_double(r.control)});
    checks.add("deviation_p" + std::to_string(r.p), r.deviation, 1e-6);
  }

  json summary;
  summary["mu1_re"] = st.mu1.real();
  summary["mu1_im"] = st.mu1.imag();
  summary["deviation_slope"] = st.slope;
  summary["control_slope"] = st.control_slope;
  summary["checks_total"] = checks.total;
  summary["checks_failed"] = checks.failures;
  summary["all_pass"] = checks.all_pass();

  Report rep;
  rep.payload["command"] = "approx";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["records"] = records;
  rep.payload["summary"] = summary;
  rep.payload["version"] = version_string;
  rep.csv = csv_table({"p", "deviation", "control"}, rows);
  rep.all_pass = checks.all_pass();

  std::ostringstream os;
  os << "approx: mu1 = " << fmt_double(st.mu1.real());
  if (std::abs(st.mu1.imag()) > 1e-14)
    os << (st.mu1.imag() < 0 ? " - " : " + ") << fmt_double(std::abs(st.mu1.imag()))
       << "i";
  os << "; " << (checks.total - checks.failures) << "/" << checks.total
     << " transport deviations within tolerance";
  rep.summary = os.str();
  return rep;
}

// ------------------------------------------------------------------ oracle

Report run_oracle(const Options& opt) {
  const cplx tau = parse_complex(opt.tau_str);
  require(tau.imag() > 0.0, ErrorKind::UsageError, "--tau needs Im tau > 0");
  const auto p_list = opt.p_list({1, 2, 4, 8});
  const auto disc = opt.disc();

  CheckList checks;
  json records = json::array();
  for (int p : p_list) {
    const auto basis = theta_basis(p, tau);
    const int N = opt.grid > 0 ? opt.grid : 0;
    const CMat G = gram(basis, N);
    const double diag_want = 1.0 / std::sqrt(2.0 * p * tau.imag());
    double diag_res = 0.0, off_max = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) {
        if (i == j)
          diag_res = std::max(diag_res, std::abs(G(i, i) - cplx(diag_want, 0.0)));
        else
          off_max = std::max(off_max, std::abs(G(i, j)));
      }
    const double doubling = gram_doubling_defect(basis, N);
    const auto one = [](double, double) { return cplx(1.0, 0.0); };
    const CMat T1 = toeplitz_matrix(one, basis, basis, N).matrix;
    const double toeplitz_res = (T1 - CMat::Identity(p, p)).cwiseAbs().maxCoeff();
    const double udef =
        l2_transport(p, tau, tau + cplx(0.0, 1.0), N, disc).unitary_defect();

    json jr;
    jr["p"] = p;
    jr["gram_diagonal_residual"] = diag_res;
    jr["gram_offdiagonal_max"] = off_max;
    jr["gram_doubling_defect"] = doubling;
    jr["projector_identity_residual"] = toeplitz_res;
    jr["transport_unitary_defect"] = udef;
    records.push_back(std::move(jr));

    const std::string tag = "_p" + std::to_string(p);
    checks.add("gram_diagonal" + tag, diag_res, 1e-9);
    checks.add("gram_offdiagonal" + tag, off_max, 1e-10);
    checks.add("gram_doubling" + tag, doubling, 1e-8);
    checks.add("projector_identity" + tag, toeplitz_res, 1e-8);
    checks.add("transport_unitarity" + tag, udef, 1e-6);
  }

  Report rep;
  rep.payload["command"] = "oracle";
  rep.payload["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
  rep.payload["records"] = records;
  rep.payload["summary"] = {{"checks_total", checks.total},
                            {"checks_failed", checks.failures},
                            {"all_pass", checks.all_pass()}};
  rep.payload["version"] = version_string;
  rep.csv = checks.csv();
  rep.all_pass = checks.all_pass();

  std::ostringstream os;
  os << "oracle: " << (checks.total - checks.failures) << "/" << checks.total
     << " self-checks " << (checks.all_pass() ? "passed" : "FAILED") << " at tau = "
     << opt.tau_str;
  rep.summary = os.str();
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"btq: quantization along paths of complex structures — "
               "identity suites, transport, coefficients, torus traces"};
  app.require_subcommand(1);

  Options opt;
  // Comma-carrying values arrive as token lists (the config reader splits
  // on commas); they are re-joined after parsing.
  std::vector<std::string> map_toks, path_toks, plist_toks, shift_toks;
  app.add_option("--map", map_toks, "integer/real 2x2 map a,b,c,d (row-major)")
      ->delimiter(',');
  app.add_option("--tau", opt.tau_str, "torus modulus, e.g. 0+1i")
      ->capture_default_str();
  app.add_option("--path", path_toks,
                 "structure path: scaling:<s> | segment:<tau0>,<tau1> | file:<knots>")
      ->delimiter(',');
  app.add_option("--t", opt.t, "path time for `transport`")->capture_default_str();
  app.add_option("--pmax", opt.pmax, "levels 4,8,...,pmax");
  app.add_option("--plist", plist_toks, "explicit comma-separated levels")
      ->delimiter(',');
  app.add_option("--shift", shift_toks, "translation part u1,u2 for `trace`")
      ->delimiter(',');
  app.add_option("--grid", opt.grid, "grid nodes per axis (0 = auto)");
  app.add_option("--steps", opt.steps, "ODE/quadrature subdivisions (0 = default)");
  app.add_option("--tol", opt.tol, "convergence tolerance override (0 = default)");
  app.add_option("--seed", opt.seed, "RNG seed for `verify`")->capture_default_str();
  app.add_option("--out", opt.out_path, "report file (default: stdout)");
  const auto json_flag = app.add_flag("--json", opt.want_json, "JSON report (default)");
  app.add_flag("--csv", opt.want_csv, "CSV report")->excludes(json_flag);
  app.set_config("--config", "",
                 "flat key=value config file; command-line flags take precedence");

  auto* cmd_verify = app.add_subcommand("verify", "seeded identity regression");
  auto* cmd_transport =
      app.add_subcommand("transport", "transport factor and identities on a path");
  auto* cmd_coeff =
      app.add_subcommand("coeff", "fixed-point leading coefficient of a 2x2 map");
  auto* cmd_trace = app.add_subcommand("trace", "torus trace study per level");
  auto* cmd_approx =
      app.add_subcommand("approx", "transport vs. weighted projector pairing");
  auto* cmd_oracle = app.add_subcommand("oracle", "torus quantization self-checks");
  for (auto* sc : {cmd_verify, cmd_transport, cmd_coeff, cmd_trace, cmd_approx,
                   cmd_oracle})
    sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto join = [](const std::vector<std::string>& toks) {
    std::string out;
    for (size_t i = 0; i < toks.size(); ++i) out += (i ? "," : "") + toks[i];
    return out;
  };
  opt.map_csv = join(map_toks);
  opt.path_str = join(path_toks);
  opt.plist_str = join(plist_toks);
  opt.shift_csv = join(shift_toks);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    Report rep;
    if (cmd_verify->parsed()) {
      rep = run_verify(opt);
    } else if (cmd_transport->parsed()) {
      rep = run_transport(opt);
    } else if (cmd_coeff->parsed()) {
      rep = run_coeff(opt);
    } else if (cmd_trace->parsed()) {
      rep = run_trace(opt);
    } else if (cmd_approx->parsed()) {
      rep = run_approx(opt);
    } else if (cmd_oracle->parsed()) {
      rep = run_oracle(opt);
    } else {
      std::cerr << "btq: no subcommand selected\n";
      return 2;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return emit(opt, std::move(rep), seconds);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UsageError) {
      std::cerr << "btq: " << e.what() << "\n";
      return 2;
    }
    // Numerical failure: emit a minimal report with the failing record.
    json j;
    j["command"] = app.get_subcommands().empty()
                       ? std::string("unknown")
                       : app.get_subcommands().front()->get_name();
    j["config"] = config_echo(opt, opt.want_csv ? "csv" : "json");
    j["error"] = {{"message", e.what()}};
    j["summary"] = {{"all_pass", false}};
    j["version"] = version_string;
    Report rep;
    rep.payload = std::move(j);
    rep.csv = csv_table({"error"}, {{e.what()}});
    rep.summary = std::string("error: ") + e.what();
    rep.all_pass = false;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      return emit(opt, std::move(rep), seconds);
    } catch (const Error&) {
      std::cerr << "btq: " << e.what() << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "btq: " << e.what() << "\n";
    return 1;
  }
}
