#include "looptrack/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorKind::InvalidInput, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string_view source_name(PointSource s) {
  switch (s) {
    case PointSource::Auto: return "auto";
    case PointSource::Raw: return "raw";
    case PointSource::Filtered: return "filtered";
  }
  return "auto";
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::InvalidInput,
          "not a number: '" + s + "'");
  return v;
}

}  // namespace

void to_json(json& j, const CurveModel& m) {
  j = json{{"family", family_name(m.family)}, {"a", m.params.a}};
  if (m.params.b) j["b"] = *m.params.b;
  j["theta"] = m.pose.theta;
  j["x0"] = m.pose.x0;
  j["y0"] = m.pose.y0;
}

void from_json(const json& j, CurveModel& m) {
  m.family = family_from_name(j.at("family").get<std::string>());
  m.params.a = j.at("a").get<double>();
  m.params.b = j.contains("b") ? std::optional<double>(j.at("b").get<double>()) : std::nullopt;
  m.pose.theta = j.value("theta", 0.0);
  m.pose.x0 = j.value("x0", 0.0);
  m.pose.y0 = j.value("y0", 0.0);
  validate(m);
}

void to_json(json& j, const PlaneFrame& f) {
  j = json{{"normal", vec3(f.normal)}, {"centroid", vec3(f.centroid)}, {"gamma", f.gamma},
           {"alpha", f.alpha},         {"sigma", vec3(f.sigma)}};
}

void from_json(const json& j, PlaneFrame& f) {
  f = PlaneFrame::from_normal(vec3(j.at("normal")), vec3(j.at("centroid")));
  if (j.contains("sigma")) f.sigma = vec3(j.at("sigma"));
}

void to_json(json& j, const FitResult& r) {
  j = json{{"model", r.model},
           {"e2", r.e2},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"e2_trace", r.e2_trace}};
}

void from_json(const json& j, FitResult& r) {
  r.model = j.at("model").get<CurveModel>();
  r.e2 = j.at("e2").get<double>();
  r.iterations = j.value("iterations", 0);
  r.converged = j.value("converged", false);
  r.e2_trace = j.value("e2_trace", std::vector<double>{});
}

void to_json(json& j, const SimulationSpec& s) {
  j = json{{"speed", s.speed}, {"rate", s.rate}, {"loops", s.loops}, {"start_parameter", s.start_parameter}};
}

void from_json(const json& j, SimulationSpec& s) {
  s.speed = j.at("speed").get<double>();
  s.rate = j.at("rate").get<double>();
  s.loops = j.at("loops").get<int>();
  s.start_parameter = j.value("start_parameter", 0.0);
}

void to_json(json& j, const GroundTruth& g) {
  j = json{{"model", g.model}, {"frame", g.frame}, {"simulation", g.sim}};
}

void from_json(const json& j, GroundTruth& g) {
  g.model = j.at("model").get<CurveModel>();
  g.frame = j.at("frame").get<PlaneFrame>();
  g.sim = j.at("simulation").get<SimulationSpec>();
}

void to_json(json& j, const FilterConfig& c) {
  j = json{{"window_len", c.window_len}, {"q_std", c.q_std},           {"r_std", c.r_std},
           {"eps_delta", c.eps_delta},   {"eps_center", c.eps_center}, {"eps_disp", c.eps_disp},
           {"max_substep_dt", c.max_substep_dt}};
}

void to_json(json& j, const PredictionHorizon& h) {
  json pts = json::array();
  for (const auto& w : h.waypoints) pts.push_back({w.t, w.pos.x(), w.pos.y()});
  j = json{{"anchor", {h.anchor.t, h.anchor.pos.x(), h.anchor.pos.y()}},
           {"dt", h.dt},
           {"m", h.waypoints.size()},
           {"waypoints", pts}};
}

void to_json(json& j, const Metrics& m) {
  j = json{{"family_correct", m.family_correct},
           {"a_rel_error", m.a_rel_error},
           {"center_error", m.center_error},
           {"theta_error", m.theta_error},
           {"mean_track_distance", m.mean_track_distance},
           {"max_track_distance", m.max_track_distance}};
  if (m.b_rel_error) j["b_rel_error"] = *m.b_rel_error;
  if (m.raw_rmse) j["raw_rmse"] = *m.raw_rmse;
  if (m.filtered_rmse) j["filtered_rmse"] = *m.filtered_rmse;
}

json probabilities_json(const ClassProbabilities& p) {
  json j = json::object();
  for (CurveFamily f : kAllFamilies) j[std::string(family_name(f))] = p[static_cast<std::size_t>(family_label(f))];
  return j;
}

json report_json(const PipelineReport& r, bool include_timings) {
  json track = json::array();
  for (const auto& s : r.predicted_track) track.push_back({s.t, s.pos.x(), s.pos.y(), s.pos.z()});
  json raw = json::array(), pts = json::array();
  for (const auto& p : r.loop_raw) raw.push_back({p.x(), p.y()});
  for (const auto& p : r.loop_points) pts.push_back({p.x(), p.y()});
  json j{{"plane", r.plane},
         {"loop_end", r.loop_end},
         {"loop", {{"times", r.loop_times}, {"raw", raw}, {"points", pts}, {"settle_samples", r.settle_samples}}},
         {"source", source_name(r.source)},
         {"class_probs", probabilities_json(r.class_probs)},
         {"network_family", family_name(r.network_family)},
         {"family", family_name(r.family)},
         {"used_fallback", r.used_fallback},
         {"fit", r.fit},
         {"predicted_track", track}};
  if (r.fallback_scores) {
    json scores = json::object();
    for (CurveFamily f : kAllFamilies) {
      scores[std::string(family_name(f))] = (*r.fallback_scores)[static_cast<std::size_t>(family_label(f))];
    }
    j["fallback_scores"] = scores;
  }
  if (include_timings) {
    j["timings_ms"] = {{"plane", r.timings.plane_ms},
                       {"tracking", r.timings.tracking_ms},
                       {"classify", r.timings.classify_ms},
                       {"fit", r.timings.fit_ms},
                       {"predict", r.timings.predict_ms}};
  }
  return j;
}

PipelineReport report_from_json(const json& j) {
  auto family = [](const json& v) { return family_from_name(v.get<std::string>()); };
  auto points = [](const json& v) {
    std::vector<Point2> out;
    for (const auto& p : v) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return out;
  };
  PipelineReport r;
  try {
    r.plane = j.at("plane").get<PlaneFrame>();
    r.loop_end = j.at("loop_end").get<std::size_t>();
    const auto src = j.at("source").get<std::string>();
    r.source = src == "filtered" ? PointSource::Filtered : src == "raw" ? PointSource::Raw : PointSource::Auto;
    const json& loop = j.at("loop");
    r.loop_times = loop.at("times").get<std::vector<double>>();
    r.loop_raw = points(loop.at("raw"));
    r.loop_points = points(loop.at("points"));
    r.settle_samples = loop.value("settle_samples", std::size_t{0});
    for (CurveFamily f : kAllFamilies) {
      r.class_probs[static_cast<std::size_t>(family_label(f))] =
          j.at("class_probs").value(std::string(family_name(f)), 0.0);
    }
    r.network_family = family(j.at("network_family"));
    r.family = family(j.at("family"));
    r.used_fallback = j.value("used_fallback", false);
    r.fit = j.at("fit").get<FitResult>();
    for (const auto& s : j.at("predicted_track")) {
      r.predicted_track.push_back({s.at(0).get<double>(), Point3(s.at(1).get<double>(), s.at(2).get<double>(),
                                                                 s.at(3).get<double>())});
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("malformed pipeline report: ") + e.what());
  }
  return r;
}

json model_json(const NetworkModel& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"in", l.weights.cols()},
                      {"out", l.weights.rows()},
                      {"activation", l.activation == Activation::Relu ? "relu" : "softmax"},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  const auto& t = net.training;
  return json{{"format", "looptrack-mlp"},
              {"version", kModelFormatVersion},
              {"normalization",
               {{"resample", net.m}, {"layout", "x_then_y"}, {"center", "centroid"}, {"scale", "rms_radius"},
                {"start", "max_x"}}},
              {"families", [] {
                 json f = json::array();
                 for (CurveFamily fam : kAllFamilies) f.push_back(family_name(fam));
                 return f;
               }()},
              {"layers", layers},
              {"training",
               {{"optimizer", t.options.optimizer},
                {"learning_rate", t.options.learning_rate},
                {"epochs", t.options.epochs},
                {"batch_size", t.options.batch_size},
                {"hidden", t.options.hidden},
                {"seed", t.options.seed},
                {"samples", t.samples},
                {"epoch_loss", t.epoch_loss},
                {"final_accuracy", t.final_accuracy}}}};
}

NetworkModel model_from_json(const json& j) {
  require(j.value("format", "") == "looptrack-mlp", ErrorKind::Configuration, "not a looptrack model file");
  require(j.value("version", 0) == kModelFormatVersion, ErrorKind::Configuration, "unsupported model version");
  NetworkModel net;
  net.m = j.at("normalization").at("resample").get<std::size_t>();
  for (const auto& jl : j.at("layers")) {
    DenseLayer l;
    const auto in = jl.at("in").get<Eigen::Index>();
    const auto out = jl.at("out").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(w.size()) == in * out && static_cast<Eigen::Index>(b.size()) == out,
            ErrorKind::Configuration, "layer weight count does not match its dimensions");
    l.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    const auto act = jl.at("activation").get<std::string>();
    require(act == "relu" || act == "softmax", ErrorKind::Configuration, "unknown activation " + act);
    l.activation = act == "relu" ? Activation::Relu : Activation::Softmax;
    net.layers.push_back(std::move(l));
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    net.training.options.optimizer = t.value("optimizer", "adam");
    net.training.options.learning_rate = t.value("learning_rate", 1e-4);
    net.training.options.epochs = t.value("epochs", 9);
    net.training.options.batch_size = t.value("batch_size", std::size_t{16});
    net.training.options.hidden = t.value("hidden", std::vector<std::size_t>{});
    net.training.options.seed = t.value("seed", std::uint64_t{1});
    net.training.samples = t.value("samples", std::size_t{0});
    net.training.epoch_loss = t.value("epoch_loss", std::vector<double>{});
    net.training.final_accuracy = t.value("final_accuracy", 0.0);
  }
  require(net.input_size() == 2 * net.m, ErrorKind::Configuration, "model input does not match its resample count");
  return net;
}

void save_model(const std::filesystem::path& path, const NetworkModel& net, const json& meta) {
  json j = model_json(net);
  j["meta"] = meta;
  write_json(path, j);
}

NetworkModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_csv(const std::filesystem::path& path, const Table& table, const json& meta) {
  auto out = open_out(path);
  out << "# looptrack " << kToolVersion << '\n';
  out << "# meta " << meta.dump() << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  require(out.good(), ErrorKind::Io, "failed writing " + path.string());
}

Table read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  Table table;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (!header) {
      table.columns = std::move(cells);
      header = true;
      continue;
    }
    require(cells.size() == table.columns.size(), ErrorKind::InvalidInput,
            "row width does not match header in " + path.string());
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_number(c));
    table.rows.push_back(std::move(row));
  }
  require(header, ErrorKind::InvalidInput, "missing CSV header in " + path.string());
  return table;
}

void write_table_json(const std::filesystem::path& path, const Table& table, const json& meta) {
  write_json(path, json{{"meta", meta}, {"columns", table.columns}, {"rows", table.rows}});
}

Table read_table_json(const std::filesystem::path& path) {
  const json j = read_json(path);
  Table t;
  try {
    t.columns = j.at("columns").get<std::vector<std::string>>();
    t.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  for (const auto& row : t.rows) {
    require(row.size() == t.columns.size(), ErrorKind::InvalidInput,
            "row width does not match columns in " + path.string());
  }
  return t;
}

Table read_table(const std::filesystem::path& path) {
  return path.extension() == ".json" ? read_table_json(path) : read_csv(path);
}

Table trajectory_table(const TrajectoryRecord& tr) {
  Table t;
  t.columns = {"t", "x", "y", "z"};
  t.rows.reserve(tr.samples.size());
  for (const auto& s : tr.samples) t.rows.push_back({s.t, s.pos.x(), s.pos.y(), s.pos.z()});
  return t;
}

TrajectoryRecord trajectory_from_table(const Table& t) {
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
      if (t.columns[i] == name) return i;
    return std::nullopt;
  };
  const auto ct = column("t"), cx = column("x"), cy = column("y"), cz = column("z");
  require(ct && cx && cy, ErrorKind::InvalidInput, "trajectory needs t, x, y columns");
  TrajectoryRecord tr;
  tr.noise_std = std::nan("");
  tr.samples.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    tr.samples.push_back({row[*ct], Point3(row[*cx], row[*cy], cz ? row[*cz] : 0.0)});
  }
  return tr;
}

void write_trajectory(const std::filesystem::path& path, const TrajectoryRecord& tr, const json& meta) {
  write_csv(path, trajectory_table(tr), meta);
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".truth.json");
  return p;
}

void write_sidecar(const std::filesystem::path& path, const TrajectoryRecord& tr, const json& meta) {
  json j{{"meta", meta}, {"noise_std", tr.noise_std}};
  if (tr.noise_seed) j["noise_seed"] = *tr.noise_seed;
  if (tr.truth) j["truth"] = *tr.truth;
  write_json(path, j);
}

TrajectoryRecord read_trajectory(const std::filesystem::path& path) {
  TrajectoryRecord tr = trajectory_from_table(read_table(path));
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    const json j = read_json(side);
    if (j.contains("noise_std") && j["noise_std"].is_number()) tr.noise_std = j["noise_std"].get<double>();
    if (j.contains("noise_seed")) tr.noise_seed = j["noise_seed"].get<std::uint64_t>();
    if (j.contains("truth")) tr.truth = j["truth"].get<GroundTruth>();
  }
  return tr;
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorKind::Io, "failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const json& meta) {
  Table t;
  t.columns.push_back("label");
  for (std::size_t i = 0; i < data.m; ++i) t.columns.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < data.m; ++i) t.columns.push_back("y" + std::to_string(i));
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::vector<double> row{static_cast<double>(data.labels[k])};
    row.insert(row.end(), data.features[k].data(), data.features[k].data() + data.features[k].size());
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t, meta);
}

Dataset read_dataset(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  require(t.columns.size() >= 9 && t.columns[0] == "label" && (t.columns.size() - 1) % 2 == 0,
          ErrorKind::InvalidInput, "dataset CSV needs a label column and 2m features");
  Dataset d;
  d.m = (t.columns.size() - 1) / 2;
  for (const auto& row : t.rows) {
    d.labels.push_back(family_label(family_from_label(static_cast<int>(row[0]))));
    d.features.push_back(Eigen::Map<const Eigen::VectorXd>(row.data() + 1, static_cast<Eigen::Index>(row.size() - 1)));
  }
  return d;
}

}  // namespace looptrack
