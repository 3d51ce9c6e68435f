#include "setmpc/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "setmpc/errors.hpp"

namespace setmpc {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty 2D array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(what + ": ragged 2D array");
    }
    for (Index c = 0; c < cols; ++c) M(i, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return M;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<size_t>(i)).get<double>();
  return v;
}

json polytope_json(const Polytope& p) {
  return json{{"G", matrix_to_json(p.G())}, {"h", vector_to_json(p.h())}};
}

Polytope polytope_from(const json& j, const std::string& what) {
  if (!j.contains("G") || !j.contains("h")) throw ConfigError(what + ": polytope needs G and h");
  Matrix G = matrix_from_json(j.at("G"), what + ".G");
  Vector h = vector_from_json(j.at("h"), what + ".h");
  try {
    return Polytope(std::move(G), std::move(h));
  } catch (const Error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

void hash_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;  // FNV-1a
  }
}

void hash_matrix(std::uint64_t& h, const Matrix& M) {
  char buf[40];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", M(i, j));
      hash_mix(h, buf);
    }
  }
  hash_mix(h, ";");
}

void hash_vector(std::uint64_t& h, const Vector& v) {
  char buf[40];
  for (Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,", v(i));
    hash_mix(h, buf);
  }
  hash_mix(h, ";");
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string polytope_to_json(const Polytope& p) { return polytope_json(p).dump(); }

Polytope polytope_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("polytope_from_json: ") + e.what());
  }
  return polytope_from(j, "polytope");
}

std::uint64_t ladder_cache_key(const LinearSystem& sys, int horizon, double ladder_tol,
                               const Tolerances& tols) {
  std::uint64_t h = 1469598103934665603ULL;
  hash_matrix(h, sys.A);
  hash_matrix(h, sys.B);
  hash_matrix(h, sys.X.G());
  hash_vector(h, sys.X.h());
  hash_matrix(h, sys.U.G());
  hash_vector(h, sys.U.h());
  char buf[160];
  std::snprintf(buf, sizeof(buf), "N=%d;tol=%.17g;%.17g,%.17g,%.17g,%.17g", horizon, ladder_tol,
                tols.feas_tol, tols.set_tol, tols.eq_tol, tols.qp_tol);
  hash_mix(h, buf);
  return h;
}

void save_ladder(const SetLadder& ladder, std::uint64_t cache_key,
                 const std::filesystem::path& path) {
  json j;
  j["system_hash"] = cache_key;
  j["N"] = ladder.horizon;
  j["tol"] = ladder.convergence_tol;
  j["converged"] = ladder.converged;
  j["k_star"] = ladder.k_star;
  j["rungs"] = json::array();
  for (const Polytope& p : ladder.rungs) j["rungs"].push_back(polytope_json(p));
  j["psi"] = json::array();
  for (const Polytope& p : ladder.psi) j["psi"].push_back(polytope_json(p));
  j["Zs"] = polytope_json(ladder.Zs);
  j["Us"] = polytope_json(ladder.Us);
  write_text_file(path, j.dump(2) + "\n");
}

SetLadder load_ladder(const std::filesystem::path& path, const LinearSystem& sys,
                      std::uint64_t expected_key) {
  const json j = load_json_file(path);
  try {
    if (j.at("system_hash").get<std::uint64_t>() != expected_key) {
      throw ConfigError("ladder cache key mismatch");
    }
    SetLadder ladder{sys,
                     j.at("N").get<int>(),
                     j.at("tol").get<double>(),
                     {},
                     {},
                     polytope_from(j.at("Zs"), "ladder.Zs"),
                     polytope_from(j.at("Us"), "ladder.Us"),
                     j.at("converged").get<bool>(),
                     j.at("k_star").get<int>()};
    for (const json& p : j.at("rungs")) ladder.rungs.push_back(polytope_from(p, "ladder.rung"));
    for (const json& p : j.at("psi")) ladder.psi.push_back(polytope_from(p, "ladder.psi"));
    if (ladder.rungs.empty() || ladder.psi.size() != ladder.rungs.size()) {
      throw ConfigError("ladder cache is incomplete");
    }
    return ladder;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const ControllerConfig& ProjectConfig::controller(const std::string& name) const {
  for (const auto& [n, cfg] : controllers) {
    if (n == name) return cfg;
  }
  throw ConfigError("unknown controller '" + name + "'");
}

const ScenarioSpec& ProjectConfig::scenario(const std::string& id) const {
  for (const ScenarioSpec& s : scenarios) {
    if (s.scenario.id == id) return s;
  }
  throw ConfigError("unknown scenario '" + id + "'");
}

ProjectConfig load_config(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  try {
    const json& sysj = j.at("system");
    Matrix A = matrix_from_json(sysj.at("A"), "system.A");
    Matrix B = matrix_from_json(sysj.at("B"), "system.B");
    Polytope X = polytope_from(sysj.at("X"), "system.X");
    Polytope U = polytope_from(sysj.at("U"), "system.U");

    LadderSpec ladder;
    if (j.contains("ladder")) {
      const json& lj = j.at("ladder");
      ladder.horizon = lj.value("N", 1);
      ladder.max_rungs = lj.value("max_rungs", 50);
      ladder.tol = lj.value("tol", 1e-6);
    }

    Tolerances tols;
    if (j.contains("tolerances")) {
      const json& tj = j.at("tolerances");
      tols.feas_tol = tj.value("feas_tol", tols.feas_tol);
      tols.set_tol = tj.value("set_tol", tols.set_tol);
      tols.eq_tol = tj.value("eq_tol", tols.eq_tol);
      tols.qp_tol = tj.value("qp_tol", tols.qp_tol);
    }

    LinearSystem system = [&]() {
      try {
        return LinearSystem(std::move(A), std::move(B), std::move(X), std::move(U));
      } catch (const Error& e) {
        throw ConfigError(std::string("system: ") + e.what());
      }
    }();

    ProjectConfig cfg{std::move(system), ladder, tols, {}, {}, {}, j.value("out_dir", "out")};

    if (j.contains("controllers")) {
      for (const json& cj : j.at("controllers")) {
        ControllerConfig c;
        c.horizon = cj.at("N").get<int>();
        c.Q = matrix_from_json(cj.at("Q"), "controller.Q");
        c.R = matrix_from_json(cj.at("R"), "controller.R");
        c.T = matrix_from_json(cj.at("T"), "controller.T");
        const std::string flavor = cj.at("flavor").get<std::string>();
        if (flavor == "layered") {
          c.flavor = ControllerFlavor::Layered;
        } else if (flavor == "tracking_terminal_equality") {
          c.flavor = ControllerFlavor::TrackingTerminalEquality;
        } else {
          throw ConfigError("controller flavor must be 'layered' or 'tracking_terminal_equality'");
        }
        const std::string name = cj.value("name", flavor);
        try {
          c.validate(cfg.system.state_dim(), cfg.system.input_dim());
        } catch (const Error& e) {
          throw ConfigError("controller '" + name + "': " + e.what());
        }
        cfg.controllers.emplace_back(name, std::move(c));
      }
    }

    if (j.contains("scenarios")) {
      for (const json& sj : j.at("scenarios")) {
        ScenarioSpec spec;
        spec.scenario.id = sj.at("id").get<std::string>();
        spec.scenario.x0 = vector_from_json(sj.at("x0"), "scenario.x0");
        spec.scenario.t_sim = sj.at("t_sim").get<int>();
        for (const json& ev : sj.at("schedule")) {
          spec.scenario.schedule.push_back(
              {ev.at("time").get<int>(), vector_from_json(ev.at("setpoint"), "schedule.setpoint")});
        }
        for (const json& name : sj.at("controllers")) {
          spec.controllers.push_back(name.get<std::string>());
        }
        try {
          spec.scenario.validate();
        } catch (const Error& e) {
          throw ConfigError("scenario '" + spec.scenario.id + "': " + e.what());
        }
        for (const std::string& name : spec.controllers) cfg.controller(name);
        cfg.scenarios.push_back(std::move(spec));
      }
    }

    if (j.contains("compare")) {
      const json& cj = j.at("compare");
      cfg.compare.count = cj.at("count").get<int>();
      cfg.compare.seed = cj.value("seed", 0ULL);
      cfg.compare.t_sim = cj.at("t_sim").get<int>();
      cfg.compare.setpoint = vector_from_json(cj.at("setpoint"), "compare.setpoint");
      for (const json& name : cj.at("controllers")) {
        cfg.compare.controllers.push_back(name.get<std::string>());
      }
      for (const std::string& name : cfg.compare.controllers) cfg.controller(name);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string controller_config_to_json(const std::string& name, const ControllerConfig& cfg) {
  json j;
  j["name"] = name;
  j["N"] = cfg.horizon;
  j["Q"] = matrix_to_json(cfg.Q);
  j["R"] = matrix_to_json(cfg.R);
  j["T"] = matrix_to_json(cfg.T);
  j["flavor"] =
      cfg.flavor == ControllerFlavor::Layered ? "layered" : "tracking_terminal_equality";
  return j.dump();
}

std::string qp_problem_to_json(const QpProblem& p) {
  json j;
  j["H"] = matrix_to_json(p.H);
  j["g"] = vector_to_json(p.g);
  j["c0"] = p.c0;
  j["G"] = matrix_to_json(p.G);
  j["h"] = vector_to_json(p.h);
  j["E"] = matrix_to_json(p.E);
  j["f"] = vector_to_json(p.f);
  json layout = json::array();
  for (const VariableSlice& s : p.layout.slices) {
    layout.push_back(json{{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  }
  j["layout"] = std::move(layout);
  return j.dump();
}

QpProblem qp_problem_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("qp_problem_from_json: ") + e.what());
  }
  try {
    QpProblem p;
    p.H = matrix_from_json(j.at("H"), "qp.H");
    p.g = vector_from_json(j.at("g"), "qp.g");
    p.c0 = j.value("c0", 0.0);
    p.G = j.at("G").empty() ? Matrix(0, p.g.size()) : matrix_from_json(j.at("G"), "qp.G");
    p.h = vector_from_json(j.at("h"), "qp.h");
    p.E = j.at("E").empty() ? Matrix(0, p.g.size()) : matrix_from_json(j.at("E"), "qp.E");
    p.f = vector_from_json(j.at("f"), "qp.f");
    for (const json& s : j.value("layout", json::array())) {
      p.layout.slices.push_back(
          {s.at("name").get<std::string>(), s.at("offset").get<Index>(), s.at("size").get<Index>()});
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("qp_problem_from_json: ") + e.what());
  }
}

void write_vertices_csv(const std::filesystem::path& path, const std::vector<Vector>& vertices) {
  std::string out = "x1,x2\n";
  for (const Vector& v : vertices) {
    out += format_double(v(0)) + "," + format_double(v.size() > 1 ? v(1) : 0.0) + "\n";
  }
  write_text_file(path, out);
}

std::vector<Vector> read_vertices_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "x1,x2") {
    throw ConfigError(path.string() + ": bad vertex CSV header");
  }
  std::vector<Vector> vertices;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw ConfigError(path.string() + ": bad vertex row");
    Vector v(2);
    v(0) = std::stod(fields[0]);
    v(1) = std::stod(fields[1]);
    vertices.push_back(std::move(v));
  }
  return vertices;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::string out = "step,x1,x2,u1,u2,mode,layer,cost,dQ,setpoint1,setpoint2\n";
  auto at = [](const Vector& v, Index i) { return i < v.size() ? v(i) : 0.0; };
  for (const StepRecord& rec : traj.steps) {
    out += std::to_string(rec.step);
    out += "," + format_double(at(rec.x, 0)) + "," + format_double(at(rec.x, 1));
    out += "," + format_double(at(rec.u, 0)) + "," + format_double(at(rec.u, 1));
    out += rec.mode.is_tracking() ? ",tracking" : ",layer";
    out += "," + std::to_string(rec.mode.layer_index());
    out += "," + format_double(rec.cost) + "," + format_double(rec.target_distance);
    out += "," + format_double(at(rec.setpoint, 0)) + "," + format_double(at(rec.setpoint, 1));
    out += "\n";
  }
  write_text_file(path, out);
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "step,x1,x2,u1,u2,mode,layer,cost,dQ,setpoint1,setpoint2") {
    throw ConfigError(path.string() + ": bad trajectory CSV header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw ConfigError(path.string() + ": bad trajectory row");
    TrajectoryRow r;
    r.step = std::stoi(f[0]);
    r.x1 = std::stod(f[1]);
    r.x2 = std::stod(f[2]);
    r.u1 = std::stod(f[3]);
    r.u2 = std::stod(f[4]);
    r.mode = f[5];
    if (r.mode != "tracking" && r.mode != "layer") {
      throw ConfigError(path.string() + ": bad mode field");
    }
    r.layer = std::stoi(f[6]);
    r.cost = std::stod(f[7]);
    r.dQ = std::stod(f[8]);
    r.setpoint1 = std::stod(f[9]);
    r.setpoint2 = std::stod(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table) {
  std::string out = "point_id,x0_1,x0_2,controller,phi,status\n";
  for (const ComparisonEntry& e : table.entries) {
    out += std::to_string(e.point_id);
    out += "," + format_double(e.x0(0)) + "," + format_double(e.x0.size() > 1 ? e.x0(1) : 0.0);
    out += "," + e.controller;
    out += "," + (e.phi ? format_double(*e.phi) : std::string("n/a"));
    out += "," + e.status + "\n";
  }
  write_text_file(path, out);
}

std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "point_id,x0_1,x0_2,controller,phi,status") {
    throw ConfigError(path.string() + ": bad comparison CSV header");
  }
  std::vector<ComparisonRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ConfigError(path.string() + ": bad comparison row");
    ComparisonRow r;
    r.point_id = std::stoi(f[0]);
    r.x0_1 = std::stod(f[1]);
    r.x0_2 = std::stod(f[2]);
    r.controller = f[3];
    r.phi = f[4];
    if (r.phi != "n/a") std::stod(r.phi);  // must parse as a number
    r.status = f[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_json(const std::filesystem::path& path, const Trajectory& traj) {
  json j;
  j["feasible"] = traj.summary.feasible;
  j["failed_step"] = traj.summary.failed_step;
  j["steps_to_tracking"] = traj.summary.steps_to_tracking;
  j["final_error"] = traj.summary.final_error;
  json per_layer = json::object();
  for (const auto& [layer, count] : traj.summary.steps_per_layer) {
    per_layer[std::to_string(layer)] = count;
  }
  j["steps_per_layer"] = std::move(per_layer);
  j["warnings"] = traj.summary.warnings;
  write_text_file(path, j.dump(2) + "\n");
}

void write_means_json(const std::filesystem::path& path, const ComparisonTable& table) {
  json j;
  j["seed"] = table.seed;
  j["t_sim"] = table.t_sim;
  j["setpoint"] = vector_to_json(table.setpoint);
  json means = json::object();
  for (const auto& [name, phi] : table.mean_phi) means[name] = phi;
  j["mean_phi"] = std::move(means);
  json failures = json::object();
  for (const auto& [name, count] : table.failures) failures[name] = count;
  j["failures"] = std::move(failures);
  write_text_file(path, j.dump(2) + "\n");
}

void write_contractivity_json(const std::filesystem::path& path,
                              const ContractivityReport& report) {
  json j;
  j["passed"] = report.passed;
  j["eps"] = report.eps;
  j["min_margin"] = report.min_margin;
  j["facets_checked"] = report.facets_checked;
  j["facets_shared"] = report.facets_shared;
  j["failing_facets"] = report.failing_facets;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace setmpc
