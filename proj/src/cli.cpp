#include "rdsat/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdsat/design.hpp"
#include "rdsat/errors.hpp"
#include "rdsat/ioutil.hpp"
#include "rdsat/lmi.hpp"
#include "rdsat/roa.hpp"
#include "rdsat/sim.hpp"
#include "rdsat/spectral.hpp"

namespace rdsat::cli {
namespace {

namespace fs = std::filesystem;

// ===========================================================================
// config file: flat sectioned key = value, '#' starts a comment
// ===========================================================================

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& msg) {
  throw parse_error(path + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> value_tokens(std::string v) {
  for (char& ch : v)
    if (ch == ',') ch = ' ';
  std::istringstream is(v);
  std::vector<std::string> toks;
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

double to_number(const std::string& tok, const std::string& path, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail_at(path, line, "expected a number, got \"" + tok + "\"");
  }
}

int to_int(const std::string& tok, const std::string& path, int line) {
  try {
    size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    fail_at(path, line, "expected an integer, got \"" + tok + "\"");
  }
}

bool to_bool(const std::string& tok, const std::string& path, int line) {
  if (tok == "true" || tok == "yes" || tok == "1") return true;
  if (tok == "false" || tok == "no" || tok == "0") return false;
  fail_at(path, line, "expected true or false, got \"" + tok + "\"");
}

std::vector<double> to_numbers(const std::string& value, const std::string& path, int line) {
  std::vector<double> out;
  for (const std::string& tok : value_tokens(value)) out.push_back(to_number(tok, path, line));
  return out;
}

// pole tokens: "a", "a+bi", "a-bi", "bi"; the sign split skips exponents
cplx parse_pole(const std::string& tok, const std::string& path, int line) {
  if (tok.empty()) fail_at(path, line, "empty pole token");
  if (tok.back() != 'i') return {to_number(tok, path, line), 0.0};
  const std::string body = tok.substr(0, tok.size() - 1);
  if (body.empty() || body == "+" || body == "-")
    return {0.0, body == "-" ? -1.0 : 1.0};
  size_t split = std::string::npos;
  for (size_t i = body.size(); i-- > 1;) {
    const char ch = body[i];
    if ((ch == '+' || ch == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos) return {0.0, to_number(body, path, line)};
  return {to_number(body.substr(0, split), path, line), to_number(body.substr(split), path, line)};
}

// number list whose shape is checked where the dimensions become known
struct raw_row {
  int line = 0;
  std::vector<double> v;
  bool set() const { return line > 0; }
};

struct run_config {
  std::string path;
  std::string dir;  // profile paths resolve relative to the config file

  operator_spec problem;
  int order = 12;
  int grid = 2001;
  bool numeric = false;

  std::vector<cplx> poles;
  raw_row gain;
  int controller = 0;  // dynamic extension order, 0 keeps the static law
  raw_row a1, a2, k2;

  certify_opts solver;

  double horizon = 10.0;
  double dt = 0.0;
  std::vector<double> z0;
  int sim_modes = 0;  // cascade width for simulate, 0 runs the modal head
  bool field = false;
  sweep_grid box;

  int actuator = 0;  // boundary compensator order
  raw_row bnd_a, bnd_b, bnd_c;
  int bnd_modes = 1;

  std::string out_dir = ".";
  bool want_csv = true, want_json = true, want_svg = false;
};

std::string resolve(const std::string& dir, const std::string& p) {
  if (dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(dir) / p).string();
}

// profile files: one sample per line (a trailing comma field wins, so
// "x,value" rows work too), uniform grid over [0, length]
sampled_fn read_profile(const std::string& file, double length, const std::string& path, int line) {
  sampled_fn f;
  f.length = length;
  std::string text;
  try {
    text = read_text_file(file);
  } catch (const parse_error&) {
    fail_at(path, line, "cannot read profile file \"" + file + "\"");
  }
  for (const std::string& raw : split_lines(text)) {
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const size_t comma = s.find_last_of(',');
    if (comma != std::string::npos) s = trim(s.substr(comma + 1));
    f.values.push_back(to_number(s, path, line));
  }
  if (f.size() < 2) fail_at(path, line, "profile \"" + file + "\" needs at least two samples");
  return f;
}

void parse_axis(sweep_grid& box, int axis, const std::string& value, const std::string& path,
                int line) {
  const std::vector<double> nums = to_numbers(value, path, line);
  if (nums.size() != 3) fail_at(path, line, "axis spec is: min max count");
  const int count = static_cast<int>(nums[2]);
  if (nums[2] != count || count < 2) fail_at(path, line, "axis count must be an integer >= 2");
  if (!(nums[1] > nums[0])) fail_at(path, line, "axis needs max > min");
  (axis == 1 ? box.z1_min : box.z2_min) = nums[0];
  (axis == 1 ? box.z1_max : box.z2_max) = nums[1];
  (axis == 1 ? box.count1 : box.count2) = count;
}

run_config load_config(const std::string& path) {
  run_config cfg;
  cfg.path = path;
  cfg.dir = fs::path(path).parent_path().string();

  const std::vector<std::string> lines = split_lines(read_text_file(path));
  std::string section;
  std::set<std::string> seen;
  std::vector<std::pair<int, std::string>> raw_inputs;
  int profile_line = 0;
  std::string profile_file;

  for (int ln = 1; ln <= static_cast<int>(lines.size()); ++ln) {
    std::string s = lines[ln - 1];
    const size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty() || s[0] == ';') continue;

    if (s.front() == '[') {
      if (s.back() != ']') fail_at(path, ln, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      static const std::set<std::string> known = {"problem", "design",   "solver",
                                                  "sim",     "boundary", "outputs"};
      if (!known.count(section)) fail_at(path, ln, "unknown section [" + section + "]");
      continue;
    }

    const size_t eq = s.find('=');
    if (eq == std::string::npos) fail_at(path, ln, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) fail_at(path, ln, "key before any [section]");
    if (key.empty()) fail_at(path, ln, "empty key");
    if (value.empty()) fail_at(path, ln, "empty value for " + key);
    if (key != "input" && !seen.insert(section + "." + key).second)
      fail_at(path, ln, "duplicate key " + key);

    if (section == "problem") {
      if (key == "length") {
        cfg.problem.length = to_number(value, path, ln);
      } else if (key == "reaction") {
        cfg.problem.reaction_const = to_number(value, path, ln);
      } else if (key == "reaction_profile") {
        profile_line = ln;
        profile_file = value;
      } else if (key == "level") {
        cfg.problem.sat_level = to_number(value, path, ln);
      } else if (key == "order") {
        cfg.order = to_int(value, path, ln);
      } else if (key == "grid") {
        cfg.grid = to_int(value, path, ln);
      } else if (key == "method") {
        if (value == "numeric")
          cfg.numeric = true;
        else if (value != "analytic")
          fail_at(path, ln, "method is analytic or numeric");
      } else if (key == "input") {
        raw_inputs.emplace_back(ln, value);
      } else {
        fail_at(path, ln, "unknown key " + key + " in [problem]");
      }
    } else if (section == "design") {
      if (key == "poles") {
        for (const std::string& tok : value_tokens(value))
          cfg.poles.push_back(parse_pole(tok, path, ln));
      } else if (key == "gain") {
        cfg.gain = {ln, to_numbers(value, path, ln)};
      } else if (key == "controller") {
        cfg.controller = to_int(value, path, ln);
        if (cfg.controller < 0) fail_at(path, ln, "controller order must be >= 0");
      } else if (key == "a1") {
        cfg.a1 = {ln, to_numbers(value, path, ln)};
      } else if (key == "a2") {
        cfg.a2 = {ln, to_numbers(value, path, ln)};
      } else if (key == "k2") {
        cfg.k2 = {ln, to_numbers(value, path, ln)};
      } else {
        fail_at(path, ln, "unknown key " + key + " in [design]");
      }
    } else if (section == "solver") {
      if (key == "margin") {
        cfg.solver.margin = to_number(value, path, ln);
        if (cfg.solver.margin < 0.0) fail_at(path, ln, "margin must be >= 0");
      } else if (key == "budget") {
        cfg.solver.budget = to_int(value, path, ln);
        if (cfg.solver.budget < 1) fail_at(path, ln, "budget must be >= 1");
      } else if (key == "minimize_gap") {
        cfg.solver.minimize_gap = to_bool(value, path, ln);
      } else {
        fail_at(path, ln, "unknown key " + key + " in [solver]");
      }
    } else if (section == "sim") {
      if (key == "horizon") {
        cfg.horizon = to_number(value, path, ln);
      } else if (key == "dt") {
        cfg.dt = to_number(value, path, ln);
      } else if (key == "z0") {
        cfg.z0 = to_numbers(value, path, ln);
      } else if (key == "modes") {
        cfg.sim_modes = to_int(value, path, ln);
        if (cfg.sim_modes < 0) fail_at(path, ln, "modes must be >= 0");
      } else if (key == "field") {
        cfg.field = to_bool(value, path, ln);
      } else if (key == "z1") {
        parse_axis(cfg.box, 1, value, path, ln);
      } else if (key == "z2") {
        parse_axis(cfg.box, 2, value, path, ln);
      } else {
        fail_at(path, ln, "unknown key " + key + " in [sim]");
      }
    } else if (section == "boundary") {
      if (key == "order") {
        cfg.actuator = to_int(value, path, ln);
        if (cfg.actuator < 1) fail_at(path, ln, "boundary order must be >= 1");
      } else if (key == "a") {
        cfg.bnd_a = {ln, to_numbers(value, path, ln)};
      } else if (key == "b") {
        cfg.bnd_b = {ln, to_numbers(value, path, ln)};
      } else if (key == "c") {
        cfg.bnd_c = {ln, to_numbers(value, path, ln)};
      } else if (key == "modes") {
        cfg.bnd_modes = to_int(value, path, ln);
        if (cfg.bnd_modes < 1) fail_at(path, ln, "boundary modes must be >= 1");
      } else {
        fail_at(path, ln, "unknown key " + key + " in [boundary]");
      }
    } else {  // outputs
      if (key == "dir") {
        cfg.out_dir = value;
      } else if (key == "formats") {
        cfg.want_csv = cfg.want_json = cfg.want_svg = false;
        for (const std::string& tok : value_tokens(value)) {
          if (tok == "csv")
            cfg.want_csv = true;
          else if (tok == "json")
            cfg.want_json = true;
          else if (tok == "svg")
            cfg.want_svg = true;
          else
            fail_at(path, ln, "unknown format \"" + tok + "\" (csv, json, svg)");
        }
      } else {
        fail_at(path, ln, "unknown key " + key + " in [outputs]");
      }
    }
  }

  if (profile_line > 0) {
    if (cfg.problem.reaction_const)
      fail_at(path, profile_line, "reaction and reaction_profile are exclusive");
    cfg.problem.reaction_profile =
        read_profile(resolve(cfg.dir, profile_file), cfg.problem.length, path, profile_line);
  }
  for (const auto& [ln, value] : raw_inputs) {
    input_shape sh;
    for (const std::string& tok : value_tokens(value)) {
      const size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        fail_at(path, ln, "input tokens are mode:weight or profile:path");
      const std::string head = tok.substr(0, colon);
      const std::string tail = tok.substr(colon + 1);
      if (head == "profile") {
        if (sh.profile) fail_at(path, ln, "one profile per input channel");
        sh.profile = read_profile(resolve(cfg.dir, tail), cfg.problem.length, path, ln);
      } else {
        const int mode = to_int(head, path, ln);
        if (mode < 1) fail_at(path, ln, "mode indices are 1-based");
        sh.mode_coeffs[mode] += to_number(tail, path, ln);
      }
    }
    if (sh.profile && !sh.mode_coeffs.empty())
      fail_at(path, ln, "an input channel is either a mode combination or a profile");
    cfg.problem.inputs.push_back(sh);
  }
  return cfg;
}

// ===========================================================================
// shared pipeline
// ===========================================================================

modal_system make_spectrum(const run_config& cfg) {
  modal_system ms = cfg.numeric ? numeric_spectrum(cfg.problem, cfg.order, cfg.grid)
                                : analytic_spectrum(cfg.problem, cfg.order, cfg.grid);
  if (cfg.numeric) select_n(ms, 0.0);
  project_inputs(ms, cfg.problem);
  return ms;
}

plant_fd head_plant(const modal_system& ms) {
  plant_fd p;
  p.A = ms.Amat();
  p.B = mat(ms.n, ms.Bmat.cols);
  for (int j = 0; j < ms.n; ++j)
    for (int k = 0; k < ms.Bmat.cols; ++k) p.B(j, k) = ms.Bmat(j, k);
  for (int j = 0; j < ms.n; ++j) p.labels.push_back("w" + std::to_string(j + 1));
  return p;
}

mat shape_matrix(const raw_row& r, int rows, int cols, const std::string& path,
                 const std::string& key) {
  if (static_cast<int>(r.v.size()) != rows * cols)
    throw parse_error(path + ":" + std::to_string(r.line) + ": " + key + " needs " +
                      std::to_string(rows) + "x" + std::to_string(cols) + " entries, got " +
                      std::to_string(r.v.size()));
  mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.v[static_cast<size_t>(i) * cols + j];
  return m;
}

mat config_gain(const run_config& cfg, const plant_fd& plant) {
  const int n = plant.order();
  const int m = plant.inputs();
  if (cfg.gain.set()) return shape_matrix(cfg.gain, m, n, cfg.path, "gain");
  if (cfg.poles.empty()) throw parse_error(cfg.path + ": [design] needs poles or gain");
  if (static_cast<int>(cfg.poles.size()) != n)
    throw parse_error(cfg.path + ": pole count must match the design order " + std::to_string(n));
  return place_poles(plant, cfg.poles);
}

// controller blocks default to A1 = -I, A2 = I (tall or wide padded), K2 = 0
dynamic_design config_dynamic(const run_config& cfg, const mat& K1) {
  const int nc = cfg.controller;
  const int n = K1.cols;
  const int m = K1.rows;
  dynamic_design dd;
  dd.K1 = K1;
  if (cfg.a1.set()) {
    dd.A1 = shape_matrix(cfg.a1, nc, nc, cfg.path, "a1");
  } else {
    dd.A1 = -1.0 * mat::identity(nc);
  }
  if (cfg.a2.set()) {
    dd.A2 = shape_matrix(cfg.a2, nc, n, cfg.path, "a2");
  } else {
    dd.A2 = mat(nc, n);
    for (int i = 0; i < nc && i < n; ++i) dd.A2(i, i) = 1.0;
  }
  dd.K2 = cfg.k2.set() ? shape_matrix(cfg.k2, m, nc, cfg.path, "k2") : mat(m, nc);
  return dd;
}

boundary_plant config_boundary(const run_config& cfg) {
  if (cfg.actuator < 1) throw parse_error(cfg.path + ": [boundary] order is required");
  if (!cfg.bnd_a.set() || !cfg.bnd_b.set() || !cfg.bnd_c.set())
    throw parse_error(cfg.path + ": [boundary] needs a, b and c");
  const int nd = cfg.actuator;
  const mat A_d = shape_matrix(cfg.bnd_a, nd, nd, cfg.path, "a");
  const mat B_d = shape_matrix(cfg.bnd_b, nd, 1, cfg.path, "b");
  const mat C_d = shape_matrix(cfg.bnd_c, 1, nd, cfg.path, "c");
  return build_boundary(A_d, B_d, C_d, cfg.problem, cfg.bnd_modes, cfg.grid);
}

// ===========================================================================
// output helpers
// ===========================================================================

std::string out_file(const run_config& cfg, const std::string& name) {
  const fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string json_nums(const std::vector<double>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt17(v[i]);
  }
  return s + "]";
}

std::string json_mat(const mat& m) {
  std::string s = "[";
  for (int i = 0; i < m.rows; ++i) {
    if (i) s += ", ";
    s += "[";
    for (int j = 0; j < m.cols; ++j) {
      if (j) s += ", ";
      s += fmt17(m(i, j));
    }
    s += "]";
  }
  return s + "]";
}

const char* kind_text(certificate_kind k) {
  switch (k) {
    case certificate_kind::static_fb: return "static";
    case certificate_kind::dynamic_fb: return "dynamic";
    case certificate_kind::pointwise: return "pointwise";
    case certificate_kind::boundary: return "boundary";
  }
  return "?";
}

void report_certificate(const certificate& cert, std::ostream& out) {
  out << "kind = " << kind_text(cert.kind) << "\n";
  out << "D =";
  for (const double d : cert.D) out << " " << fmt17(d);
  out << "\n";
  if (cert.global()) {
    out << "region: global\n";
  } else {
    out << "rho = " << fmt17(cert.rho) << "\n";
    const eig_result eig = sym_eig(cert.region_matrix());
    out << "semi-axes =";
    for (const double v : eig.values) out << " " << fmt17(std::sqrt(cert.rho / v));
    out << "\n";
    out << "volume = " << fmt17(cert.volume()) << "\n";
  }
  out << "alpha = " << fmt17(cert.alpha) << "\n";
  if (cert.kind == certificate_kind::pointwise) out << "beta = " << fmt17(cert.beta) << "\n";
  out << "residuals =";
  for (const double r : cert.residuals) out << " " << fmt17(r);
  out << "\n";
}

// ===========================================================================
// sweep figure: certificate ellipse under the trajectory fan, fixed 600x600
// canvas, %.2f pixel coordinates so reruns are byte-identical
// ===========================================================================

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct svg_frame {
  double xmin, xmax, ymin, ymax;
  double X(double x) const { return 40.0 + (x - xmin) / (xmax - xmin) * 520.0; }
  double Y(double y) const { return 560.0 - (y - ymin) / (ymax - ymin) * 520.0; }
  bool holds(const vec& z) const {
    return z[0] >= xmin && z[0] <= xmax && z[1] >= ymin && z[1] <= ymax;
  }
};

std::string sweep_svg(const plant_fd& plant, const certificate& cert, double ell,
                      const sweep_result& sr, sim_opts opts) {
  const sweep_grid& g = sr.grid;
  const svg_frame fr{g.z1_min, g.z1_max, g.z2_min, g.z2_max};
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
         "viewBox=\"0 0 600 600\">\n";
  svg += "<rect x=\"40\" y=\"40\" width=\"520\" height=\"520\" fill=\"#ffffff\" "
         "stroke=\"#333333\"/>\n";
  if (!cert.global()) {
    const std::vector<vec> ring = ellipsoid_boundary_samples(cert.region_matrix(), cert.rho, 256);
    std::string d;
    for (size_t i = 0; i < ring.size(); ++i) {
      d += (i == 0) ? "M" : " L";
      d += svg_num(fr.X(ring[i][0]));
      d += " ";
      d += svg_num(fr.Y(ring[i][1]));
    }
    svg += "<path d=\"" + d + " Z\" fill=\"#aec7e8\" fill-opacity=\"0.6\" stroke=\"#1f77b4\"/>\n";
  }
  opts.cert = nullptr;
  for (size_t p = 0; p < sr.points.size(); ++p) {
    const trajectory traj = simulate_modal(plant, ell, sr.points[p], opts);
    std::string pts;
    int kept = 0;
    for (size_t s = 0; s < traj.states.size(); s += 10) {
      if (!fr.holds(traj.states[s])) break;  // clip the fan at the plot box
      if (kept) pts += " ";
      pts += svg_num(fr.X(traj.states[s][0]));
      pts += ",";
      pts += svg_num(fr.Y(traj.states[s][1]));
      ++kept;
    }
    if (kept < 2) continue;
    const bool bad = traj.label == traj_label::diverged;
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
           (bad ? "#d62728" : "#000000") + "\" stroke-width=\"0.6\" stroke-opacity=\"0.5\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// ===========================================================================
// subcommands
// ===========================================================================

int cmd_eig(const run_config& cfg, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  for (int j = 0; j < ms.order(); ++j)
    out << "lambda_" << (j + 1) << " = " << fmt17(ms.eigvals[j]) << "\n";
  out << "n = " << ms.n << "\n";
  out << "eta = " << fmt17(ms.eta) << "\n";
  if (cfg.want_json) {
    std::string j = "{\n";
    j += "  \"order\": " + std::to_string(ms.order()) + ",\n";
    j += "  \"n\": " + std::to_string(ms.n) + ",\n";
    j += "  \"eta\": " + fmt17(ms.eta) + ",\n";
    j += std::string("  \"already_stable\": ") + (ms.already_stable ? "true" : "false") + ",\n";
    j += "  \"eigenvalues\": " + json_nums(ms.eigvals) + ",\n";
    j += "  \"B\": " + json_mat(ms.Bmat) + "\n";
    j += "}\n";
    const std::string file = out_file(cfg, "spectrum.json");
    write_text_file(file, j);
    out << "wrote " << file << "\n";
  }
  return 0;
}

int cmd_design(const run_config& cfg, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  plant_fd plant = head_plant(ms);
  const mat K = config_gain(cfg, plant);
  plant = with_gain(plant, K);
  out << "K =";
  for (int i = 0; i < K.rows; ++i)
    for (int j = 0; j < K.cols; ++j) out << " " << fmt17(K(i, j));
  out << "\n";
  std::vector<cplx> poles = eigenvalues(closed_loop(plant));
  std::sort(poles.begin(), poles.end(), [](const cplx& x, const cplx& y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  for (const cplx& p : poles)
    out << "pole = " << fmt17(p.real()) << " " << (p.imag() < 0.0 ? "-" : "+") << " "
        << fmt17(std::abs(p.imag())) << "i\n";
  if (cfg.want_json) {
    std::string j = "{\n  \"K\": " + json_mat(K) + ",\n  \"poles\": [";
    for (size_t i = 0; i < poles.size(); ++i) {
      if (i) j += ", ";
      j += "[" + fmt17(poles[i].real()) + ", " + fmt17(poles[i].imag()) + "]";
    }
    j += "]\n}\n";
    const std::string file = out_file(cfg, "design.json");
    write_text_file(file, j);
    out << "wrote " << file << "\n";
  }
  return 0;
}

int cmd_certify(const run_config& cfg, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  plant_fd plant = head_plant(ms);
  const mat K = config_gain(cfg, plant);
  plant = with_gain(plant, K);
  const double ell = cfg.problem.sat_level;
  certificate cert;
  if (cfg.controller > 0) {
    const certificate base = certify_static(plant, ell, cfg.solver);
    cert = certify_dynamic(plant, config_dynamic(cfg, K), base.region_matrix(), ell, cfg.solver);
  } else {
    cert = certify_static(plant, ell, cfg.solver);
  }
  report_certificate(cert, out);
  if (cfg.want_json) {
    const std::string file = out_file(cfg, "certificate.json");
    write_certificate(file, cert);
    out << "wrote " << file << "\n";
  }
  return 0;
}

int cmd_verify(const run_config& cfg, const std::string& cert_path, std::ostream& out) {
  const certificate cert = read_certificate(cert_path);
  mat A, B;
  if (cert.kind == certificate_kind::boundary) {
    const boundary_plant bp = config_boundary(cfg);
    if (bp.augmented.order() != cert.P.n)
      throw precondition_error("verify: certificate order does not match the boundary plant");
    A = bp.augmented.A;
    B = bp.augmented.B;
  } else if (cert.kind == certificate_kind::dynamic_fb) {
    throw precondition_error(
        "verify: dynamic certificates carry their augmented plant only at design time; re-run "
        "certify");
  } else {
    const modal_system ms = make_spectrum(cfg);
    const plant_fd plant = head_plant(ms);
    if (plant.order() != cert.P.n)
      throw precondition_error("verify: certificate order does not match the configured problem");
    A = plant.A;
    B = plant.B;
  }
  const verify_report rep =
      verify_certificate(cert.P, cert.C, cert.D, A, B, cert.K, cfg.problem.sat_level, cert.form);
  std::string text = rep.summary();
  if (!text.empty() && text.back() != '\n') text += "\n";
  out << text;
  out << "verdict: " << (rep.pass ? "pass" : "FAIL") << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_sweep(const run_config& cfg, int threads, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  plant_fd plant = head_plant(ms);
  plant = with_gain(plant, config_gain(cfg, plant));
  const double ell = cfg.problem.sat_level;
  const certificate cert = certify_static(plant, ell, cfg.solver);
  sim_opts opts;
  opts.T = cfg.horizon;
  opts.dt = cfg.dt;
  const sweep_result sr = sweep(plant, cert, ell, cfg.box, opts, threads);
  int conv = 0, div = 0, inside = 0;
  for (size_t i = 0; i < sr.labels.size(); ++i) {
    conv += sr.labels[i] == traj_label::converged;
    div += sr.labels[i] == traj_label::diverged;
    inside += sr.inside[i];
  }
  out << "points = " << sr.points.size() << "\n";
  out << "converged = " << conv << ", diverged = " << div
      << ", undecided = " << static_cast<int>(sr.points.size()) - conv - div << "\n";
  out << "inside certificate = " << inside << ", diverged inside = " << sr.diverged_inside
      << "\n";
  if (cfg.want_csv) {
    const std::string file = out_file(cfg, "sweep.csv");
    write_sweep_csv(file, sr);
    out << "wrote " << file << "\n";
  }
  if (cfg.want_svg) {
    if (plant.order() == 2) {
      const std::string file = out_file(cfg, "sweep.svg");
      write_text_file(file, sweep_svg(plant, cert, ell, sr, opts));
      out << "wrote " << file << "\n";
    } else {
      out << "svg skipped: the phase figure needs exactly two retained modes\n";
    }
  }
  return 0;
}

int cmd_simulate(const run_config& cfg, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  plant_fd plant = head_plant(ms);
  const mat K = config_gain(cfg, plant);
  plant = with_gain(plant, K);
  const double ell = cfg.problem.sat_level;
  if (cfg.z0.empty()) throw parse_error(cfg.path + ": [sim] z0 is required by simulate");

  certificate cert = certify_static(plant, ell, cfg.solver);
  sim_opts opts;
  opts.T = cfg.horizon;
  opts.dt = cfg.dt;
  trajectory traj;
  const int N = cfg.sim_modes > 0 ? cfg.sim_modes : ms.n;
  if (N > ms.n) {
    cert.gamma = tail_gamma(cert, ms);
    opts.cert = &cert;
    traj = simulate_galerkin(ms, K, ell, cfg.z0, N, opts);
  } else {
    if (static_cast<int>(cfg.z0.size()) != ms.n)
      throw parse_error(cfg.path + ": z0 needs one entry per retained mode (" +
                        std::to_string(ms.n) + ")");
    opts.cert = &cert;
    traj = simulate_modal(plant, ell, cfg.z0, opts);
  }
  out << "label = " << label_name(traj.label) << "\n";
  out << "samples = " << traj.times.size() << "\n";
  out << "final |w| = " << fmt17(norm2(traj.states.back())) << "\n";
  if (!traj.lyapunov.empty())
    out << "V: " << fmt17(traj.lyapunov.front()) << " -> " << fmt17(traj.lyapunov.back()) << "\n";
  if (cfg.want_csv) {
    const std::string file = out_file(cfg, "trajectory.csv");
    write_trajectory_csv(file, traj);
    out << "wrote " << file << "\n";
    if (cfg.field && N > ms.n) {
      const int tstride = std::max<size_t>(1, traj.times.size() / 201);
      const int xstride = std::max<int>(1, ms.eigfuncs.front().size() / 201);
      const std::string ffile = out_file(cfg, "field.csv");
      write_field_csv(ffile, traj, ms, tstride, xstride);
      out << "wrote " << ffile << "\n";
    }
  }
  return 0;
}

int cmd_boundary(const run_config& cfg, std::ostream& out) {
  const boundary_plant bp = config_boundary(cfg);
  const mat K = config_gain(cfg, bp.augmented);
  const certificate cert = certify_boundary(bp, K, cfg.problem.sat_level, cfg.solver);
  out << "states =";
  for (const std::string& l : bp.augmented.labels) out << " " << l;
  out << "\n";
  out << "K =";
  for (int j = 0; j < K.cols; ++j) out << " " << fmt17(K(0, j));
  out << "\n";
  report_certificate(cert, out);
  if (cfg.want_json) {
    const std::string file = out_file(cfg, "boundary_certificate.json");
    write_certificate(file, cert);
    out << "wrote " << file << "\n";
  }
  return 0;
}

int cmd_pointwise(const run_config& cfg, std::ostream& out) {
  const modal_system ms = make_spectrum(cfg);
  plant_fd plant = head_plant(ms);
  plant = with_gain(plant, config_gain(cfg, plant));
  const double ell = cfg.problem.sat_level;
  const certificate base = certify_static(plant, ell, cfg.solver);
  std::vector<sampled_fn> shapes;
  for (const input_shape& in : cfg.problem.inputs) {
    if (in.profile) {
      shapes.push_back(*in.profile);
      continue;
    }
    sampled_fn f;
    f.length = ms.eigfuncs.front().length;
    f.values.assign(ms.eigfuncs.front().values.size(), 0.0);
    for (const auto& [mode, weight] : in.mode_coeffs) {
      if (mode > ms.order())
        throw precondition_error("pointwise: input mode exceeds the truncation order");
      for (size_t i = 0; i < f.values.size(); ++i)
        f.values[i] += weight * ms.eigfuncs[mode - 1].values[i];
    }
    shapes.push_back(f);
  }
  const certificate cert = certify_pointwise(plant, shapes, ell, base);
  report_certificate(cert, out);
  if (cfg.want_json) {
    const std::string file = out_file(cfg, "pointwise_certificate.json");
    write_certificate(file, cert);
    out << "wrote " << file << "\n";
  }
  return 0;
}

}  // namespace

// ===========================================================================
// entry point
// ===========================================================================

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"saturated modal feedback design and certification for reaction-diffusion models"};
  app.fallthrough();
  std::string config_path, out_flag, cert_path;
  std::vector<std::string> format_flag;
  int threads = 0;
  app.add_option("--config", config_path, "problem configuration file");
  app.add_option("--out", out_flag, "output directory (overrides [outputs] dir)");
  app.add_option("--format", format_flag, "artifact formats: csv, json, svg")->delimiter(',');
  app.add_option("--threads", threads, "sweep worker threads (0 = hardware count)");
  app.require_subcommand(1);

  CLI::App* c_eig = app.add_subcommand("eig", "print the operator spectrum and the truncation");
  CLI::App* c_design = app.add_subcommand("design", "compute the modal feedback gain");
  CLI::App* c_certify =
      app.add_subcommand("certify", "design, solve the inequalities, verify, store the estimate");
  CLI::App* c_verify = app.add_subcommand("verify", "re-check a stored certificate");
  c_verify->add_option("certificate", cert_path, "certificate json file")->required();
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "grid of closed-loop runs against the certified region");
  CLI::App* c_simulate = app.add_subcommand("simulate", "integrate the closed loop from z0");
  CLI::App* c_boundary =
      app.add_subcommand("boundary", "certify the boundary-actuated cascade loop");
  CLI::App* c_pointwise =
      app.add_subcommand("pointwise", "certify under pointwise-in-space saturation");

  try {
    std::vector<const char*> argv;
    argv.push_back("rdsat");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "rdsat: " << e.what() << "\n";
    return 2;
  }

  try {
    if (config_path.empty()) throw parse_error("rdsat: --config is required");
    run_config cfg = load_config(config_path);
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (!format_flag.empty()) {
      cfg.want_csv = cfg.want_json = cfg.want_svg = false;
      for (const std::string& f : format_flag) {
        if (f == "csv")
          cfg.want_csv = true;
        else if (f == "json")
          cfg.want_json = true;
        else if (f == "svg")
          cfg.want_svg = true;
        else
          throw parse_error("rdsat: unknown format \"" + f + "\" (csv, json, svg)");
      }
    }
    if (c_eig->parsed()) return cmd_eig(cfg, out);
    if (c_design->parsed()) return cmd_design(cfg, out);
    if (c_certify->parsed()) return cmd_certify(cfg, out);
    if (c_verify->parsed()) return cmd_verify(cfg, cert_path, out);
    if (c_sweep->parsed()) return cmd_sweep(cfg, threads, out);
    if (c_simulate->parsed()) return cmd_simulate(cfg, out);
    if (c_boundary->parsed()) return cmd_boundary(cfg, out);
    if (c_pointwise->parsed()) return cmd_pointwise(cfg, out);
    return 0;
  } catch (const parse_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const budget_error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const precondition_error& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rdsat::cli
