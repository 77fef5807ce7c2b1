#include "hmmlab/io.hpp"

#include <fstream>
#include <sstream>

#include "hmmlab/stats.hpp"

namespace hmmlab {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ConfigError("expected array at " + path);
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError("expected number at " + path);
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array() || arr.empty())
    throw ConfigError("expected nonempty array of rows at " + path);
  const Eigen::Index cols = static_cast<Eigen::Index>(arr[0].size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(arr.size()), cols);
  for (std::size_t r = 0; r < arr.size(); ++r) {
    const Eigen::VectorXd row = vector_from_json(arr[r], path);
    if (row.size() != cols) throw ConfigError("ragged matrix at " + path);
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw ConfigError("unknown key at " + path + "/" + key);
  }
}

}  // namespace

json model_to_json(const ModelConfig& config) {
  json j;
  j["family"] = config.family;
  j["states"] = config.states;
  j["box_lower"] = vector_to_json(config.box_lower);
  j["box_upper"] = vector_to_json(config.box_upper);
  if (config.family == "gaussian_mean" || config.family == "gauss2_sym_trans")
    j["sigma"] = config.sigma;
  if (config.transition.size() > 0) j["transition"] = matrix_to_json(config.transition);
  return j;
}

ModelConfig model_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("expected object at " + path);
  reject_unknown(j, path,
                 {"family", "states", "sigma", "box_lower", "box_upper", "transition"});
  ModelConfig config;
  if (!j.contains("family") || !j["family"].is_string())
    throw ConfigError("missing family at " + path);
  config.family = j["family"].get<std::string>();
  if (!j.contains("states") || !j["states"].is_number_integer())
    throw ConfigError("missing integer states at " + path);
  config.states = j["states"].get<int>();
  if (!j.contains("box_lower") || !j.contains("box_upper"))
    throw ConfigError("missing box bounds at " + path);
  config.box_lower = vector_from_json(j["box_lower"], path + "/box_lower");
  config.box_upper = vector_from_json(j["box_upper"], path + "/box_upper");
  if (j.contains("sigma")) config.sigma = j["sigma"].get<double>();
  if (j.contains("transition"))
    config.transition = matrix_from_json(j["transition"], path + "/transition");
  return config;
}

void write_text(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out << content;
}

void write_json(const std::filesystem::path& file, const json& j) {
  write_text(file, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + file.string() + ": " + e.what());
  }
  return j;
}

std::string csv_row(std::span<const double> values) {
  std::string row;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) row += ',';
    row += format_double(values[i]);
  }
  return row;
}

void write_path_csv(const std::filesystem::path& file, const PathPair& path) {
  std::ostringstream out;
  out << "t,state,y\n";
  for (std::size_t t = 0; t < path.states.size(); ++t)
    out << (t + 1) << ',' << path.states[t] << ','
        << format_double(path.observations[t]) << '\n';
  write_text(file, out.str());
}

void write_filter_trace_csv(const std::filesystem::path& file,
                            const FilterTrace& trace) {
  std::ostringstream out;
  out << "t";
  for (Eigen::Index s = 0; s < trace.filters.cols(); ++s) out << ",p" << (s + 1);
  out << ",increment\n";
  for (Eigen::Index t = 0; t < trace.filters.rows(); ++t) {
    out << (t + 1);
    for (Eigen::Index s = 0; s < trace.filters.cols(); ++s)
      out << ',' << format_double(trace.filters(t, s));
    out << ',' << format_double(trace.increments[t]) << '\n';
  }
  write_text(file, out.str());
}

void write_tail_check_csv(const std::filesystem::path& file, const TailCheck& check) {
  std::ostringstream out;
  out << "radius,empirical_freq,theoretical_bound\n";
  for (std::size_t i = 0; i < check.radii.size(); ++i)
    out << format_double(check.radii[i]) << ','
        << format_double(check.empirical_freq[i]) << ','
        << format_double(check.theoretical_bound[i]) << '\n';
  write_text(file, out.str());
}

json tail_check_sidecar(const TailCheck& check, std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["replicates"] = check.replicates;
  j["n"] = check.n;
  j["functional_mean"] = check.functional_mean;
  j["functional_sd"] = check.functional_sd;
  return j;
}

json mixing_to_json(const MixingReport& report) {
  json j;
  j["d_theta"] = report.d_theta;
  j["truncation_T"] = report.truncation_T;
  j["tail_bound"] = report.tail_bound;
  j["eta"] = report.eta;
  j["eta_step"] = report.eta_step;
  return j;
}

json constants_to_json(const ConstantsBundle& bundle) {
  json j;
  j["branch"] = bundle.branch == T1Branch::countable ? "countable" : "continuous";
  j["mixing"] = mixing_to_json(bundle.mixing);
  j["c_h"] = bundle.c_h;
  j["c_y"] = bundle.c_y;
  j["l_w"] = bundle.l_w;
  j["delta1"] = bundle.delta1;
  j["delta2"] = bundle.delta2;
  j["delta"] = bundle.delta;
  j["l_lip"] = bundle.l_lip;
  j["c_e"] = bundle.c_e;
  j["c_tilde"] = bundle.c_tilde;
  return j;
}

void write_covering_csv(const std::filesystem::path& file,
                        const CoveringReport& report) {
  std::ostringstream out;
  out << "center_index";
  const int d = report.centers.empty() ? 0 : static_cast<int>(report.centers[0].size());
  for (int i = 0; i < d; ++i) out << ",theta" << (i + 1);
  out << '\n';
  for (std::size_t c = 0; c < report.centers.size(); ++c) {
    out << c;
    for (int i = 0; i < d; ++i) out << ',' << format_double(report.centers[c][i]);
    out << '\n';
  }
  write_text(file, out.str());
}

json covering_to_json(const CoveringReport& report) {
  json j;
  j["xi"] = report.xi;
  j["j"] = report.j;
  j["eps"] = report.eps;
  j["N"] = report.centers.size();
  j["bound"] = report.bound;
  j["max_gap"] = report.max_gap;
  j["grid_points"] = report.grid_points;
  json centers = json::array();
  for (const auto& c : report.centers) centers.push_back(vector_to_json(c));
  j["centers"] = centers;
  return j;
}

void write_error_rates_csv(const std::filesystem::path& file,
                           const ErrorRateReport& report, double eps) {
  std::ostringstream out;
  out << "n,j,n_eps2_j2,type1,type1_se,bound1,type2,type2_se,bound2,members,skipped\n";
  for (const auto& row : report.rows) {
    out << row.n << ',' << row.j << ','
        << format_double(static_cast<double>(row.n) * eps * eps * row.j * row.j) << ','
        << format_double(row.type1) << ',' << format_double(row.type1_se) << ','
        << format_double(row.bound1) << ',' << format_double(row.type2) << ','
        << format_double(row.type2_se) << ',' << format_double(row.bound2) << ','
        << row.member_count << ',' << (row.skipped ? 1 : 0) << '\n';
  }
  write_text(file, out.str());
}

json test_function_to_json(const TestFunction& test) {
  json j;
  j["kind"] = test.kind == TestKind::simple
                  ? "simple"
                  : (test.kind == TestKind::ball ? "ball" : "composite");
  j["theta0"] = vector_to_json(test.theta0);
  json members = json::array();
  for (const auto& m : test.members) {
    json mj;
    mj["center"] = vector_to_json(m.center);
    mj["critical_value"] = m.critical_value;
    mj["annulus_j"] = m.annulus_j;
    mj["j_hat"] = m.j_hat;
    members.push_back(mj);
  }
  j["members"] = members;
  return j;
}

TestFunction test_function_from_json(const json& j) {
  TestFunction test;
  const std::string kind = j.at("kind").get<std::string>();
  test.kind = kind == "simple" ? TestKind::simple
                               : (kind == "ball" ? TestKind::ball : TestKind::composite);
  test.theta0 = vector_from_json(j.at("theta0"), "test/theta0");
  for (const auto& mj : j.at("members")) {
    BallMember m;
    m.center = vector_from_json(mj.at("center"), "test/members/center");
    m.critical_value = mj.at("critical_value").get<double>();
    m.annulus_j = mj.at("annulus_j").get<int>();
    m.j_hat = mj.at("j_hat").get<double>();
    test.members.push_back(std::move(m));
  }
  return test;
}

void write_posterior_csv(const std::filesystem::path& file, const PosteriorRun& run) {
  std::ostringstream out;
  out << "iteration";
  for (Eigen::Index i = 0; i < run.samples.cols(); ++i) out << ",theta" << (i + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < run.samples.rows(); ++r) {
    out << r;
    for (Eigen::Index i = 0; i < run.samples.cols(); ++i)
      out << ',' << format_double(run.samples(r, i));
    out << '\n';
  }
  write_text(file, out.str());
}

json posterior_sidecar(const PosteriorRun& run) {
  json j;
  j["seed"] = run.seed;
  j["n"] = run.n;
  j["acceptance_rate"] = run.acceptance_rate;
  j["burn_in"] = run.burn_in;
  j["thinning"] = run.thinning;
  j["retained"] = run.samples.rows();
  j["warnings"] = run.warnings;
  return j;
}

void write_contraction_csv(const std::filesystem::path& file,
                           const ContractionDiagnostic& diag) {
  std::ostringstream out;
  out << "n,M,outside_mass,se\n";
  for (std::size_t ni = 0; ni < diag.n_grid.size(); ++ni)
    for (std::size_t mi = 0; mi < diag.m_grid.size(); ++mi)
      out << diag.n_grid[ni] << ',' << format_double(diag.m_grid[mi]) << ','
          << format_double(diag.outside_mass(static_cast<Eigen::Index>(ni),
                                             static_cast<Eigen::Index>(mi)))
          << ','
          << format_double(diag.se(static_cast<Eigen::Index>(ni),
                                   static_cast<Eigen::Index>(mi)))
          << '\n';
  write_text(file, out.str());
}

json bvm_to_json(const BvmDiagnostic& diag) {
  json j;
  j["score"] = vector_to_json(diag.score);
  j["fisher_score_cov"] = matrix_to_json(diag.fisher.score_cov);
  j["fisher_neg_hessian"] = matrix_to_json(diag.fisher.neg_hessian);
  j["fisher_rel_frobenius_gap"] = diag.fisher.rel_frobenius_gap;
  j["delta_n0"] = vector_to_json(diag.delta_n0);
  j["lan_remainder"] = diag.lan_remainder;
  j["tv_estimate"] = diag.tv_estimate;
  return j;
}

void write_lan_csv(const std::filesystem::path& file, const LanReport& report) {
  std::ostringstream out;
  out << "n,h_norm,mean_abs_remainder,se,trimmed\n";
  for (const auto& cell : report.cells)
    out << cell.n << ',' << format_double(cell.h.norm()) << ','
        << format_double(cell.mean_abs_remainder) << ',' << format_double(cell.se)
        << ',' << (cell.trimmed ? 1 : 0) << '\n';
  write_text(file, out.str());
}

void write_prior_mass_csv(const std::filesystem::path& file,
                          const PriorMassReport& report) {
  std::ostringstream out;
  out << "j,annulus_mass,bn_mass,ratio,bound,pass\n";
  for (const auto& row : report.rows)
    out << row.j << ',' << format_double(row.annulus_mass) << ','
        << format_double(row.bn_mass) << ',' << format_double(row.ratio) << ','
        << format_double(row.bound) << ',' << (row.pass ? 1 : 0) << '\n';
  write_text(file, out.str());
}

json divergence_to_json(const DivergenceEstimate& est) {
  json j;
  j["theta_a"] = vector_to_json(est.theta_a);
  j["theta_b"] = vector_to_json(est.theta_b);
  j["n"] = est.n;
  j["h_n"] = est.h_n;
  j["se"] = est.se;
  j["j_limit"] = est.j_limit;
  j["ladder_increment"] = est.ladder_increment;
  return j;
}

json kappa_to_json(const KappaBounds& bounds) {
  json j;
  j["kappa1"] = bounds.kappa1;
  j["kappa2"] = bounds.kappa2;
  j["valid"] = bounds.valid;
  j["ratios"] = bounds.ratios;
  return j;
}

}  // namespace hmmlab
