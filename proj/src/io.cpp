#include "pbounds/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pbounds {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, int row, const char* what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("panel csv row " + std::to_string(row) + ": bad " +
                                what + " value '" + s + "'");
  }
}

long parse_long(const std::string& s, int row, const char* what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("panel csv row " + std::to_string(row) + ": bad " +
                                what + " value '" + s + "'");
  return v;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

PanelDataset load_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open panel csv: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("panel csv is empty: " + path);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "t" || header[2] != "y")
    throw std::invalid_argument(
        "panel csv header must start with id,t,y (long format)");
  int K = 0;
  bool has_y0 = false;
  for (size_t c = 3; c < header.size(); ++c) {
    if (header[c] == "y0") {
      if (c + 1 != header.size())
        throw std::invalid_argument("panel csv: y0 must be the last column");
      has_y0 = true;
    } else if (header[c] == "x" + std::to_string(K + 1)) {
      ++K;
    } else {
      throw std::invalid_argument("panel csv: unexpected column '" + header[c] + "'");
    }
  }

  struct Row {
    long id;
    int t;
    int y;
    Vector x;
    int y0;
  };
  std::vector<long> order;                       // ids by first appearance
  std::map<long, std::map<int, Row>> by_unit;    // id -> t -> row
  int T = 0;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::invalid_argument("panel csv row " + std::to_string(row_no) +
                                  ": found " + std::to_string(f.size()) +
                                  " fields, expected " + std::to_string(header.size()));
    Row r;
    r.id = parse_long(f[0], row_no, "id");
    r.t = static_cast<int>(parse_long(f[1], row_no, "t"));
    const long y = parse_long(f[2], row_no, "y");
    if (y != 0 && y != 1)
      throw std::invalid_argument("panel csv row " + std::to_string(row_no) +
                                  ": y must be 0 or 1, found " + f[2]);
    r.y = static_cast<int>(y);
    r.x.resize(K);
    for (int k = 0; k < K; ++k)
      r.x[k] = parse_double(f[static_cast<size_t>(3 + k)], row_no, "covariate");
    r.y0 = 0;
    if (has_y0) {
      const long y0 = parse_long(f.back(), row_no, "y0");
      if (y0 != 0 && y0 != 1)
        throw std::invalid_argument("panel csv row " + std::to_string(row_no) +
                                    ": y0 must be 0 or 1");
      r.y0 = static_cast<int>(y0);
    }
    if (r.t < 1)
      throw std::invalid_argument("panel csv row " + std::to_string(row_no) +
                                  ": t must be >= 1");
    T = std::max(T, r.t);
    const long id = r.id;
    const int t = r.t;
    auto [uit, unit_inserted] = by_unit.try_emplace(id);
    if (unit_inserted) order.push_back(id);
    if (!uit->second.emplace(t, std::move(r)).second)
      throw std::invalid_argument("panel csv: duplicate (id,t) = (" +
                                  std::to_string(id) + "," + std::to_string(t) + ")");
  }
  if (order.empty()) throw std::invalid_argument("panel csv has no data rows");

  std::vector<long> offenders;
  for (long id : order)
    if (static_cast<int>(by_unit[id].size()) != T ||
        by_unit[id].begin()->first != 1 || by_unit[id].rbegin()->first != T)
      offenders.push_back(id);
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << "panel csv is unbalanced (need t = 1.." << T << " per id); offending ids:";
    for (size_t i = 0; i < offenders.size() && i < 20; ++i) msg << ' ' << offenders[i];
    if (offenders.size() > 20) msg << " ...";
    throw std::invalid_argument(msg.str());
  }

  PanelDataset panel;
  panel.n = static_cast<int>(order.size());
  panel.T = T;
  panel.K = K;
  panel.y.resize(panel.n, T);
  panel.x.resize(static_cast<Index>(panel.n) * T, K);
  if (has_y0) panel.y0.resize(panel.n);
  for (int i = 0; i < panel.n; ++i) {
    const auto& unit = by_unit[order[static_cast<size_t>(i)]];
    int y0_seen = -1;
    for (const auto& [t, r] : unit) {
      panel.y(i, t - 1) = r.y;
      panel.x.row(static_cast<Index>(i) * T + (t - 1)) = r.x;
      if (has_y0) {
        if (y0_seen >= 0 && y0_seen != r.y0)
          throw std::invalid_argument("panel csv: y0 differs within id " +
                                      std::to_string(r.id));
        y0_seen = r.y0;
      }
    }
    if (has_y0) panel.y0[i] = y0_seen;
  }
  panel.validate();
  return panel;
}

void save_panel_csv(const PanelDataset& panel, const std::string& path) {
  panel.validate();
  std::ostringstream os;
  os << "id,t,y";
  for (int k = 1; k <= panel.K; ++k) os << ",x" << k;
  if (panel.has_y0()) os << ",y0";
  os << "\n";
  char buf[40];
  for (int i = 0; i < panel.n; ++i)
    for (int t = 0; t < panel.T; ++t) {
      os << (i + 1) << ',' << (t + 1) << ',' << panel.y(i, t);
      for (int k = 0; k < panel.K; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", panel.x(i * panel.T + t, k));
        os << ',' << buf;
      }
      if (panel.has_y0()) os << ',' << panel.y0[i];
      os << "\n";
    }
  write_text_file(path, os.str());
}

json bound_function_record(const BoundFunction& bf) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["classes"] = bf.classes.members;
  j["ell"] = vector_to_json(bf.ell);
  j["u"] = vector_to_json(bf.u);
  json anchors = json::array();
  for (const Vector& b : bf.beta_anchor) anchors.push_back(vector_to_json(b));
  j["beta_anchor"] = anchors;
  j["objective"] = bf.objective_kind == BoundObjective::Uniform ? "uniform" : "baseline";
  j["refined"] = bf.refined;
  j["box_capped"] = bf.box_capped;
  j["b_min"] = bf.b_min;
  j["b_max"] = bf.b_max;
  json x = json::array();
  for (Index t = 0; t < bf.z.x.rows(); ++t) {
    json row = json::array();
    for (Index k = 0; k < bf.z.x.cols(); ++k) row.push_back(bf.z.x(t, k));
    x.push_back(row);
  }
  j["z"] = {{"x", x}, {"T", bf.z.x.rows()}, {"K", bf.z.x.cols()}};
  if (bf.z.y0) j["z"]["y0"] = *bf.z.y0;
  return j;
}

BoundFunction bound_function_from_record(const json& j) {
  BoundFunction bf;
  const auto& members = j.at("classes");
  bf.classes.members.resize(members.size());
  int total = 0;
  for (size_t c = 0; c < members.size(); ++c) {
    for (const auto& mask : members[c]) {
      bf.classes.members[c].push_back(mask.get<int>());
      ++total;
    }
  }
  bf.classes.class_of.assign(static_cast<size_t>(total), -1);
  for (size_t c = 0; c < bf.classes.members.size(); ++c)
    for (int mask : bf.classes.members[c])
      bf.classes.class_of.at(static_cast<size_t>(mask)) = static_cast<int>(c);
  bf.ell = vector_from_json(j.at("ell"));
  bf.u = vector_from_json(j.at("u"));
  for (const auto& b : j.at("beta_anchor")) bf.beta_anchor.push_back(vector_from_json(b));
  bf.objective_kind = j.at("objective") == "uniform" ? BoundObjective::Uniform
                                                     : BoundObjective::Baseline;
  bf.refined = j.at("refined").get<bool>();
  bf.box_capped = j.at("box_capped").get<bool>();
  bf.b_min = j.at("b_min").get<double>();
  bf.b_max = j.at("b_max").get<double>();
  const auto& zj = j.at("z");
  const Index T = zj.at("T").get<Index>();
  const Index K = zj.at("K").get<Index>();
  bf.z.x.resize(T, K);
  for (Index t = 0; t < T; ++t)
    for (Index k = 0; k < K; ++k) bf.z.x(t, k) = zj.at("x")[t][k].get<double>();
  if (zj.contains("y0")) bf.z.y0 = zj.at("y0").get<int>();
  return bf;
}

void save_bound_functions(const std::vector<BoundFunction>& bfs,
                          const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  json arr = json::array();
  for (const BoundFunction& bf : bfs) arr.push_back(bound_function_record(bf));
  j["bound_functions"] = arr;
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<BoundFunction> load_bound_functions(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  std::vector<BoundFunction> out;
  for (const auto& rec : j.at("bound_functions"))
    out.push_back(bound_function_from_record(rec));
  return out;
}

json to_record(const BoundsEstimate& be) {
  json j;
  j["L_hat"] = be.L_hat;
  j["U_hat"] = be.U_hat;
  j["sigma_L"] = be.sigma_L;
  j["sigma_U"] = be.sigma_U;
  switch (be.method) {
    case BoundsMethod::KnownBeta: j["method"] = "known-beta"; break;
    case BoundsMethod::CrossFit: j["method"] = "cross-fit"; break;
    case BoundsMethod::CrossFitSet: j["method"] = "cross-fit-set"; break;
  }
  j["n"] = be.per_unit.size();
  if (!be.beta_by_half.empty()) {
    j["beta_half_1"] = vector_to_json(be.beta_by_half[0]);
    j["beta_half_2"] = vector_to_json(be.beta_by_half[1]);
  }
  if (be.method == BoundsMethod::CrossFitSet) {
    j["sigma_L_half"] = {be.sigma_L_half[0], be.sigma_L_half[1]};
    j["sigma_U_half"] = {be.sigma_U_half[0], be.sigma_U_half[1]};
    j["set_diameter"] = {be.set_diameter[0], be.set_diameter[1]};
  }
  return j;
}

json to_record(const ConfidenceInterval& ci) {
  json j;
  j["lower"] = ci.lower;
  j["upper"] = ci.upper;
  j["alpha"] = ci.alpha;
  j["gamma"] = ci.gamma;
  switch (ci.method) {
    case CiMethod::Theorem1: j["method"] = "theorem1"; break;
    case CiMethod::Method1: j["method"] = "method1"; break;
    case CiMethod::Method2: j["method"] = "method2"; break;
  }
  json d;
  d["c_value"] = ci.diagnostics.c_value;
  d["sigma_L"] = ci.diagnostics.sigma_L;
  d["sigma_U"] = ci.diagnostics.sigma_U;
  d["degenerate_variance"] = ci.diagnostics.degenerate_variance;
  if (ci.method == CiMethod::Method1) {
    d["beta_grid_size"] = ci.diagnostics.beta_grid_size;
    d["beta_grid_step"] = ci.diagnostics.beta_grid_step;
  }
  if (ci.method == CiMethod::Method2) {
    d["set_diameter"] = {ci.diagnostics.set_diameter[0], ci.diagnostics.set_diameter[1]};
    if (ci.diagnostics.winning_alpha > 0.0) {
      d["winning_alpha"] = ci.diagnostics.winning_alpha;
      d["winning_gamma"] = ci.diagnostics.winning_gamma;
    }
  }
  j["diagnostics"] = d;
  return j;
}

json to_record(const IdentifiedSet& set) {
  json j;
  j["lower"] = set.lower;
  j["upper"] = set.upper;
  j["feasibility_slack"] = set.feasibility_slack;
  json per_z = json::array();
  for (const auto& [lo, hi] : set.per_z) per_z.push_back({lo, hi});
  j["per_z"] = per_z;
  return j;
}

json to_record(const ReplicationSummary& s) {
  json j;
  j["reps"] = s.reps;
  j["failures"] = s.failures;
  j["mean_L"] = s.mean_L;
  j["mean_U"] = s.mean_U;
  j["q_low"] = s.q_low;
  j["q_high"] = s.q_high;
  j["coverage"] = s.coverage;
  j["ci_lower"] = s.ci_lower;
  j["ci_upper"] = s.ci_upper;
  j["m_true"] = s.m_true;
  j["m_true_se"] = s.m_true_se;
  return j;
}

json to_record(const DgpSpec& dgp) {
  json j;
  j["kind"] = to_string(dgp.kind);
  j["n"] = dgp.n;
  j["T"] = dgp.T;
  j["beta0"] = dgp.beta0;
  j["a2"] = dgp.a2;
  j["gamma0"] = dgp.gamma0;
  j["x_support"] = dgp.x_support;
  j["seed"] = dgp.seed;
  return j;
}

json to_record(const TrueEffect& te) {
  json j;
  j["value"] = te.value;
  j["se"] = te.se;
  j["draws"] = te.draws;
  return j;
}

std::string sweep_csv_text(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "param,m_true,mean_L,mean_U,q_low_L,q_high_U,ci_lower,ci_upper,coverage,"
        "reps,failures\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << buf;
  };
  for (const SweepRow& r : rows) {
    put(r.param);
    os << ',';
    put(r.summary.m_true);
    os << ',';
    put(r.summary.mean_L);
    os << ',';
    put(r.summary.mean_U);
    os << ',';
    put(r.summary.q_low);
    os << ',';
    put(r.summary.q_high);
    os << ',';
    put(r.summary.ci_lower);
    os << ',';
    put(r.summary.ci_upper);
    os << ',';
    put(r.summary.coverage);
    os << ',' << r.summary.reps << ',' << r.summary.failures << "\n";
  }
  return os.str();
}

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  write_text_file(path, sweep_csv_text(rows));
}

void save_choice_prob_csv(const ChoiceProbTable& table, const std::string& path) {
  std::ostringstream os;
  const Index K = table.cells.empty() ? 0 : table.cells.front().z.x.cols();
  os << "weight,unit_count,thin";
  for (Index t = 0; t < table.T; ++t)
    for (Index k = 0; k < K; ++k) os << ",x" << (k + 1) << "_t" << (t + 1);
  os << ",y0";
  for (int mask = 0; mask < outcome_count(table.T); ++mask) {
    os << ",p_y";
    for (int t = 0; t < table.T; ++t) os << ((mask >> t) & 1);
  }
  os << "\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << buf;
  };
  for (const auto& cell : table.cells) {
    put(cell.weight);
    os << ',' << cell.unit_count << ',' << (cell.thin ? 1 : 0);
    for (Index t = 0; t < table.T; ++t)
      for (Index k = 0; k < K; ++k) {
        os << ',';
        put(cell.z.x(t, k));
      }
    os << ',' << (cell.z.y0 ? std::to_string(*cell.z.y0) : std::string("-"));
    for (Index mask = 0; mask < cell.probs.size(); ++mask) {
      os << ',';
      put(cell.probs[mask]);
    }
    os << "\n";
  }
  write_text_file(path, os.str());
}

json result_envelope(const std::string& command, const std::string& effective_config,
                     json payload) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = kVersion;
  j["command"] = command;
  j["effective_config"] = effective_config;
  j["result"] = std::move(payload);
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pbounds
