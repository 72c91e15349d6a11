#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "looptrack/error.hpp"
#include "looptrack/io.hpp"
#include "looptrack/pipeline.hpp"
#include "looptrack/predictor.hpp"

namespace looptrack::cli {

namespace fs = std::filesystem;

namespace {

// Flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Singularity:
    case ErrorKind::NumericalFailure:
    case ErrorKind::InvalidInitialization:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

json value_from_text(const std::string& text, bool is_text) {
  if (is_text) return text;
  try {
    json j = json::parse(text);
    if (!j.is_object()) return j;
  } catch (const json::exception&) {
  }
  return text;
}

json option_json(const CLI::Option* opt) {
  if (opt->get_type_size() == 0) return opt->count() > 0 && opt->as<bool>();
  const bool is_text = opt->get_type_name() == "TEXT" || opt->get_type_name().empty();
  const bool many = opt->get_items_expected_max() > 1;
  if (opt->count() == 0) {
    const std::string d = opt->get_default_str();
    if (d.empty()) return nullptr;
    return many ? value_from_text(d, false) : value_from_text(d, is_text);
  }
  const auto& results = opt->results();
  if (!many) return value_from_text(results.back(), is_text);
  json arr = json::array();
  for (const auto& r : results) arr.push_back(value_from_text(r, is_text));
  return arr;
}

void add_options(const CLI::App& app, json& into) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt == app.get_help_ptr() || opt == app.get_config_ptr() || opt == app.get_version_ptr()) continue;
    const std::string name = opt->get_single_name();
    if (name.empty()) continue;
    into[name] = option_json(opt);
  }
}

// Global options plus the selected subcommand's options, defaults included.
json effective_config(const CLI::App& app) {
  json j = json::object();
  add_options(app, j);
  for (const CLI::App* sub : app.get_subcommands()) {
    json s = json::object();
    add_options(*sub, s);
    j[sub->get_name()] = s;
  }
  return j;
}

void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      auto p = parents;
      p.push_back(key);
      flatten(value, p, items);
      continue;
    }
    if (value.is_null()) continue;
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& e : value) item.inputs.push_back(text(e));
    } else {
      item.inputs.push_back(text(value));
    }
    items.push_back(std::move(item));
  }
}

/// JSON config files: top-level keys are global options, nested objects hold
/// subcommand options. The effective config embedded in outputs reads back.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    return effective_config(*app).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    // an output file's metadata block also works as a config
    if (j.contains("meta") && j["meta"].is_object()) j = j["meta"];
    if (j.contains("config") && j["config"].is_object()) j = j["config"];
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }
};

struct Global {
  std::uint64_t seed = 1;
  std::string output = ".";
  std::string format = "csv";
};

class Session {
 public:
  Session(const CLI::App& app, const Global& g, const std::vector<std::string>& args, std::ostream& out)
      : app_(app), g_(g), args_(args), out_(out) {}

  std::ostream& out() const { return out_; }
  const Global& global() const { return g_; }

  json meta(const json& seeds = json::object()) const {
    std::string command = "looptrack";
    for (const auto& a : args_) {
      command += ' ';
      command += a.find_first_of(" \t\"'") == std::string::npos ? a : json(a).dump();
    }
    return json{{"tool", "looptrack"},
                {"version", kToolVersion},
                {"command", command},
                {"config", effective_config(app_)},
                {"seeds", seeds}};
  }

  fs::path path(const std::string& stem, const std::string& ext) const { return fs::path(g_.output) / (stem + ext); }

  fs::path write_table(const std::string& stem, const Table& table, const json& meta) const {
    if (g_.format == "json") {
      const auto p = path(stem, ".json");
      write_table_json(p, table, meta);
      return p;
    }
    const auto p = path(stem, ".csv");
    write_csv(p, table, meta);
    return p;
  }

  fs::path write_document(const std::string& stem, json body, const json& meta) const {
    body["meta"] = meta;
    const auto p = path(stem, ".json");
    write_json(p, body);
    return p;
  }

 private:
  const CLI::App& app_;
  const Global& g_;
  const std::vector<std::string>& args_;
  std::ostream& out_;
};

// A trajectory moved into its best-fit plane.
struct PlanarInput {
  TrajectoryRecord record;
  PlaneFrame plane;
  std::vector<Point2> points;
  std::vector<double> times;
};

PlanarInput load_planar(const std::string& file) {
  PlanarInput in;
  in.record = read_trajectory(file);
  require(in.record.samples.size() >= 3, ErrorKind::Precondition, "input needs at least 3 samples");
  std::vector<Point3> pts3;
  for (const auto& s : in.record.samples) {
    pts3.push_back(s.pos);
    in.times.push_back(s.t);
  }
  in.plane = fit_plane(pts3);
  in.points = align_to_xy(pts3, in.plane);
  return in;
}

// The first loop when the input closes, otherwise everything.
std::size_t loop_length(const PlanarInput& in) {
  try {
    return find_first_loop(in.points, in.record.noise_std, PipelineConfig{});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::IncompleteLoop) throw;
    return in.points.size();
  }
}

// Noiseless positions of the ground-truth target at sample indices [0, count).
std::vector<Point3> truth_positions(const GroundTruth& gt, std::size_t count) {
  SimulationSpec sim = gt.sim;
  TrajectoryRecord clean = simulate_target(gt.model, gt.frame, sim);
  while (clean.samples.size() < count) {
    sim.loops *= 2;
    clean = simulate_target(gt.model, gt.frame, sim);
  }
  std::vector<Point3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(clean.samples[i].pos);
  return out;
}

Point2 in_plane(const PlaneFrame& f, const Point3& p) {
  const Point3 q = f.rotation() * (p - f.centroid);
  return {q.x(), q.y()};
}

Table curve_table(const CurveModel& model, const PlaneFrame& frame, std::size_t n) {
  Table t;
  t.columns = {"u", "v", "x", "y", "z"};
  for (const auto& q : sample_model(model, n)) {
    const Point3 p = lift_to_3d(q, frame);
    t.rows.push_back({q.x(), q.y(), p.x(), p.y(), p.z()});
  }
  return t;
}

void add_filter_options(CLI::App* sub, FilterConfig& f) {
  sub->add_option("--window", f.window_len, "Sliding window length for curvature estimation")
      ->check(CLI::Range(std::size_t{4}, std::numeric_limits<std::size_t>::max()));
  sub->add_option("--q-std", f.q_std, "Process noise std (m)")->check(CLI::NonNegativeNumber);
  sub->add_option("--r-std", f.r_std, "Measurement noise std (m)")->check(CLI::NonNegativeNumber);
  sub->add_option("--max-substep", f.max_substep_dt, "Largest Euler sub-step (s)")->check(CLI::PositiveNumber);
}

std::vector<std::string> family_names() {
  std::vector<std::string> names;
  for (CurveFamily f : kAllFamilies) names.emplace_back(family_name(f));
  return names;
}

// ---- simulate ----

struct SimulateArgs {
  std::string family;
  double a = 1.0;
  std::optional<double> b;
  double theta = 0.0, x0 = 0.0, y0 = 0.0;
  std::vector<double> normal{0.0, 0.0, 1.0};
  std::vector<double> origin{0.0, 0.0, 0.0};
  SimulationSpec sim;
  double noise = 0.0;
  std::string name = "trajectory";
};

void setup_simulate(CLI::App* sub, SimulateArgs& a) {
  sub->add_option("--family", a.family, "Curve family")->required()->check(CLI::IsMember(family_names()));
  sub->add_option("--a", a.a, "Primary size parameter (m)")->check(CLI::PositiveNumber);
  sub->add_option("--b", a.b, "Second parameter for circle_ellipse and limacon (m)")->check(CLI::PositiveNumber);
  sub->add_option("--theta", a.theta, "In-plane rotation (rad)");
  sub->add_option("--x0", a.x0, "In-plane center x (m)");
  sub->add_option("--y0", a.y0, "In-plane center y (m)");
  sub->add_option("--normal", a.normal, "Plane normal")->expected(3);
  sub->add_option("--origin", a.origin, "Plane origin")->expected(3);
  sub->add_option("--speed", a.sim.speed, "Ground speed (m/s)")->check(CLI::PositiveNumber);
  sub->add_option("--rate", a.sim.rate, "Sample rate (Hz)")->check(CLI::PositiveNumber);
  sub->add_option("--loops", a.sim.loops, "Number of loops")->check(CLI::Range(1, 1000000));
  sub->add_option("--start", a.sim.start_parameter, "Curve parameter of the first sample");
  sub->add_option("--noise", a.noise, "Measurement noise std per axis (m)")->check(CLI::NonNegativeNumber);
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_simulate(const Session& s, const SimulateArgs& a) {
  CurveModel model;
  model.family = family_from_name(a.family);
  if (arity(model.family) == 2 && !a.b) throw UsageError("--b is required for " + a.family);
  if (arity(model.family) == 1 && a.b) throw UsageError("--b is not a parameter of " + a.family);
  model.params = a.b ? CanonicalParams::of(a.a, *a.b) : CanonicalParams::of(a.a);
  model.pose = Pose2{a.theta, a.x0, a.y0};
  const Point3 normal(a.normal[0], a.normal[1], a.normal[2]);
  if (!(normal.norm() > 0.0)) throw UsageError("--normal must be non-zero");
  const PlaneFrame frame = PlaneFrame::from_normal(normal, Point3(a.origin[0], a.origin[1], a.origin[2]));

  const TrajectoryRecord tr = add_noise(simulate_target(model, frame, a.sim), a.noise, s.global().seed);
  const json meta = s.meta({{"noise", s.global().seed}});
  const auto file = s.write_table(a.name, trajectory_table(tr), meta);
  write_sidecar(sidecar_path(file), tr, meta);
  s.out() << "simulate: " << tr.samples.size() << " samples, duration " << tr.samples.back().t << " s -> "
          << file.string() << '\n';
  return kExitOk;
}

// ---- track ----

struct TrackArgs {
  std::string input;
  FilterConfig filter;
  std::string name = "track";
};

void setup_track(CLI::App* sub, TrackArgs& a) {
  sub->add_option("--input", a.input, "Trajectory file (t,x,y[,z])")->required();
  add_filter_options(sub, a.filter);
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_track(const Session& s, const TrackArgs& a) {
  const PlanarInput in = load_planar(a.input);
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < in.points.size(); ++i) obs.push_back({in.times[i], in.points[i]});
  const auto states = track(obs, a.filter);

  Table t;
  t.columns = {"t", "x", "y", "z", "mx", "my", "mz", "p_trace", "mode"};
  std::vector<Point2> filtered;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& st = states[i];
    filtered.push_back(st.filtered);
    const Point3 p = lift_to_3d(st.filtered, in.plane);
    const Point3& m = in.record.samples[i].pos;
    t.rows.push_back({st.t, p.x(), p.y(), p.z(), m.x(), m.y(), m.z(), st.P.trace(), static_cast<double>(st.mode)});
  }
  const json meta = s.meta();
  const auto file = s.write_table(a.name, t, meta);

  const std::size_t skip = 2 * a.filter.window_len;
  json summary{{"input", a.input}, {"samples", states.size()}, {"window_len", a.filter.window_len},
               {"filter", a.filter}, {"plane", in.plane}, {"rmse_skip", skip}};
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& st : states) ++counts[static_cast<int>(st.mode)];
  summary["modes"] = {{"warmup", counts[0]}, {"curved", counts[1]}, {"straight", counts[2]}, {"stationary", counts[3]}};
  if (in.record.truth && states.size() > skip) {
    const auto truth3 = truth_positions(*in.record.truth, states.size());
    std::vector<Point2> truth2;
    for (const auto& p : truth3) truth2.push_back(in_plane(in.plane, p));
    const double raw = position_rmse(in.points, truth2, skip);
    const double fil = position_rmse(filtered, truth2, skip);
    summary["raw_rmse"] = raw;
    summary["filtered_rmse"] = fil;
    s.out() << "track: raw RMSE " << raw << " m, filtered RMSE " << fil << " m\n";
  }
  s.write_document(a.name + ".summary", summary, meta);
  if (in.record.truth) write_sidecar(sidecar_path(file), in.record, meta);
  s.out() << "track: " << states.size() << " states -> " << file.string() << '\n';
  return kExitOk;
}

// ---- predict ----

struct PredictArgs {
  std::string input;
  std::size_t steps = 10;
  std::size_t window = 10;
  std::optional<std::size_t> at;
  std::string name = "prediction";
};

void setup_predict(CLI::App* sub, PredictArgs& a) {
  sub->add_option("--input", a.input, "Filtered-state or trajectory file")->required();
  sub->add_option("--steps", a.steps, "Prediction horizon m")->check(CLI::PositiveNumber);
  sub->add_option("--window", a.window, "States used by the observation phase")
      ->check(CLI::Range(std::size_t{4}, std::numeric_limits<std::size_t>::max()));
  sub->add_option("--at", a.at, "Index of the anchor state (default: last)");
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_predict(const Session& s, const PredictArgs& a) {
  const PlanarInput in = load_planar(a.input);
  const std::size_t n = in.points.size();
  const std::size_t anchor = a.at.value_or(n - 1);
  require(anchor < n, ErrorKind::Precondition, "--at is past the last state");
  require(anchor + 1 >= a.window, ErrorKind::Precondition, "not enough states before the anchor for the window");

  std::vector<TimedPoint> states;
  for (std::size_t i = anchor + 1 - a.window; i <= anchor; ++i) states.push_back({in.times[i], in.points[i]});
  const ObservationSummary obs = observe_phase(states);
  const TimedPoint& last = states.back();
  const auto rot = predict_horizon(last, obs.evolution, obs.last_displacement, a.steps, obs.mean_dt);
  const auto dr = dead_reckoning(last, obs.last_displacement, a.steps, obs.mean_dt);

  Table t;
  t.columns = {"step", "t", "x", "y", "z", "dr_x", "dr_y", "dr_z"};
  for (std::size_t j = 0; j < a.steps; ++j) {
    const Point3 p = lift_to_3d(rot.waypoints[j].pos, in.plane);
    const Point3 q = lift_to_3d(dr.waypoints[j].pos, in.plane);
    t.rows.push_back({static_cast<double>(j + 1), rot.waypoints[j].t, p.x(), p.y(), p.z(), q.x(), q.y(), q.z()});
  }
  const json meta = s.meta();
  const auto file = s.write_table(a.name, t, meta);

  json summary{{"input", a.input},
               {"anchor_index", anchor},
               {"window", a.window},
               {"steps", a.steps},
               {"dt", obs.mean_dt},
               {"evolution", {{"c", obs.evolution.c}, {"s", obs.evolution.s}, {"angle", obs.evolution.angle()}}},
               {"mean_speed", obs.mean_speed}};
  if (in.record.truth) {
    // waypoint j continues the sample sequence at index anchor + j
    const auto truth3 = truth_positions(*in.record.truth, anchor + a.steps + 1);
    double err_rot = 0.0, err_dr = 0.0;
    for (std::size_t j = 0; j < a.steps; ++j) {
      const Point2 truth = in_plane(in.plane, truth3[anchor + j + 1]);
      err_rot += (rot.waypoints[j].pos - truth).norm();
      err_dr += (dr.waypoints[j].pos - truth).norm();
    }
    const Point2 final_truth = in_plane(in.plane, truth3[anchor + a.steps]);
    summary["truth_comparison"] = {{"mean_error", err_rot / static_cast<double>(a.steps)},
                                   {"mean_error_dead_reckoning", err_dr / static_cast<double>(a.steps)},
                                   {"final_error", (rot.waypoints.back().pos - final_truth).norm()},
                                   {"final_error_dead_reckoning", (dr.waypoints.back().pos - final_truth).norm()}};
    s.out() << "predict: mean error " << err_rot / static_cast<double>(a.steps) << " m (dead reckoning "
            << err_dr / static_cast<double>(a.steps) << " m)\n";
  }
  s.write_document(a.name + ".summary", summary, meta);
  s.out() << "predict: " << a.steps << " waypoints -> " << file.string() << '\n';
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::size_t per_class = 2000;
  double noise = 0.01;
  std::size_t resample = kDefaultResample;
  TrainOptions opts;
  std::string dataset;
  bool save_dataset = false;
  std::string name = "model";
};

void setup_train(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--per-class", a.per_class, "Synthetic loops per family")->check(CLI::PositiveNumber);
  sub->add_option("--noise", a.noise, "Noise std as a fraction of a")->check(CLI::NonNegativeNumber);
  sub->add_option("--resample", a.resample, "Points per preprocessed loop")
      ->check(CLI::Range(std::size_t{4}, std::size_t{100000}));
  sub->add_option("--optimizer", a.opts.optimizer, "Optimizer")->check(CLI::IsMember({"adam"}));
  sub->add_option("--lr", a.opts.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", a.opts.epochs, "Training epochs")->check(CLI::Range(1, 100000));
  sub->add_option("--batch", a.opts.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--hidden", a.opts.hidden, "Hidden layer widths")->delimiter(',');
  sub->add_option("--dataset", a.dataset, "Train on this dataset CSV instead of generating one");
  sub->add_flag("--save-dataset", a.save_dataset, "Also write the generated dataset");
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_train(const Session& s, TrainArgs a) {
  const std::uint64_t seed = s.global().seed;
  for (std::size_t h : a.opts.hidden) {
    if (h == 0) throw UsageError("--hidden widths must be positive");
  }
  a.opts.seed = seed + 1;
  Dataset data = a.dataset.empty() ? generate_dataset(a.per_class, a.noise, seed, a.resample) : read_dataset(a.dataset);
  const json meta = s.meta({{"dataset", seed}, {"training", a.opts.seed}});
  if (a.save_dataset && a.dataset.empty()) write_dataset(s.path(a.name + ".dataset", ".csv"), data, meta);

  const NetworkModel net = train(data, a.opts);
  const auto file = s.path(a.name, ".json");
  save_model(file, net, meta);
  const auto& info = net.training;
  json report{{"optimizer", info.options.optimizer},
              {"learning_rate", info.options.learning_rate},
              {"epochs", info.options.epochs},
              {"batch_size", info.options.batch_size},
              {"hidden", info.options.hidden},
              {"samples", info.samples},
              {"resample", net.m},
              {"epoch_loss", info.epoch_loss},
              {"final_accuracy", info.final_accuracy}};
  s.write_document(a.name + ".report", report, meta);
  s.out() << "train: " << info.samples << " samples, " << info.options.epochs
          << " epochs, training accuracy " << info.final_accuracy << " -> " << file.string() << '\n';
  return kExitOk;
}

// ---- classify ----

struct ClassifyArgs {
  std::string model;
  std::string input;
  std::string name = "classification";
};

void setup_classify(CLI::App* sub, ClassifyArgs& a) {
  sub->add_option("--model", a.model, "Trained model file")->required();
  sub->add_option("--input", a.input, "Trajectory file")->required();
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_classify(const Session& s, const ClassifyArgs& a) {
  const NetworkModel net = load_model(a.model);
  const PlanarInput in = load_planar(a.input);
  const std::size_t n = loop_length(in);
  const std::span<const Point2> loop(in.points.data(), n);
  const ClassProbabilities p = classify(net, preprocess(loop, net.m));
  const CurveFamily best = argmax_family(p);
  json body{{"input", a.input},
            {"loop_samples", n},
            {"family", family_name(best)},
            {"confidence", p[static_cast<std::size_t>(family_label(best))]},
            {"probabilities", probabilities_json(p)}};
  const auto file = s.write_document(a.name, body, s.meta());
  s.out() << "classify: " << family_name(best) << " (p = " << p[static_cast<std::size_t>(family_label(best))]
          << ") -> " << file.string() << '\n';
  return kExitOk;
}

// ---- fit ----

struct FitArgs {
  std::string input;
  std::string family;
  FitOptions opts;
  std::size_t curve_samples = 512;
  std::string name = "fit";
};

void setup_fit(CLI::App* sub, FitArgs& a) {
  sub->add_option("--input", a.input, "Trajectory file holding one loop")->required();
  sub->add_option("--family", a.family, "Curve family (default: best residual over all)")
      ->check(CLI::IsMember(family_names()));
  sub->add_option("--max-iterations", a.opts.max_iterations, "Levenberg-Marquardt iteration cap")
      ->check(CLI::PositiveNumber);
  sub->add_option("--phases", a.opts.multistart_phases, "Theta multi-start phases")->check(CLI::PositiveNumber);
  sub->add_option("--curve-samples", a.curve_samples, "Samples of the fitted curve in the plot table")
      ->check(CLI::Range(std::size_t{4}, std::size_t{1000000}));
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_fit(const Session& s, const FitArgs& a) {
  const PlanarInput in = load_planar(a.input);
  const std::size_t n = loop_length(in);
  const std::span<const Point2> loop(in.points.data(), n);
  json body{{"input", a.input}, {"loop_samples", n}, {"plane", in.plane}};
  FitResult fit;
  if (a.family.empty()) {
    const ResidualRanking ranking = classify_by_residual(loop, a.opts);
    fit = ranking.fits[static_cast<std::size_t>(family_label(ranking.best))];
    json scores = json::object();
    for (CurveFamily f : kAllFamilies) scores[std::string(family_name(f))] = ranking.score[static_cast<std::size_t>(family_label(f))];
    body["selection"] = "residual";
    body["scores"] = scores;
  } else {
    fit = fit_curve(family_from_name(a.family), loop, a.opts);
    body["selection"] = "given";
  }
  body["fit"] = fit;
  const json meta = s.meta();
  const auto file = s.write_document(a.name, body, meta);
  s.write_table(a.name + ".curve", curve_table(fit.model, in.plane, a.curve_samples), meta);
  s.out() << "fit: " << family_name(fit.model.family) << " e2 " << fit.e2 << " after " << fit.iterations
          << " iterations -> " << file.string() << '\n';
  return kExitOk;
}

// ---- pipeline ----

struct PipelineArgs {
  std::string input;
  std::string model;
  std::string source = "auto";
  PipelineConfig cfg;
  std::optional<double> closure_radius;
  bool timings = false;
  std::size_t curve_samples = 512;
  std::string name = "pipeline";
};

void setup_pipeline(CLI::App* sub, PipelineArgs& a) {
  sub->add_option("--input", a.input, "Trajectory file")->required();
  sub->add_option("--model", a.model, "Trained model file")->required();
  sub->add_option("--source", a.source, "Points to classify and fit")->check(CLI::IsMember({"auto", "raw", "filtered"}));
  sub->add_option("--min-confidence", a.cfg.min_confidence, "Fall back to residual ranking below this")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--closure-radius", a.closure_radius, "Loop closure radius (m)")->check(CLI::PositiveNumber);
  sub->add_option("--min-path-factor", a.cfg.min_path_factor, "Minimum loop path in RMS radii")
      ->check(CLI::PositiveNumber);
  sub->add_option("--prediction-loops", a.cfg.prediction_loops, "Length of the predicted track in loops")
      ->check(CLI::PositiveNumber);
  add_filter_options(sub, a.cfg.filter);
  sub->add_option("--curve-samples", a.curve_samples, "Samples of the fitted curve in the plot table")
      ->check(CLI::Range(std::size_t{4}, std::size_t{1000000}));
  sub->add_flag("--timings", a.timings, "Include stage timings in the report (not reproducible)");
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_pipeline(const Session& s, PipelineArgs a) {
  a.cfg.source = a.source == "raw" ? PointSource::Raw : a.source == "filtered" ? PointSource::Filtered : PointSource::Auto;
  a.cfg.closure_radius = a.closure_radius;
  const NetworkModel net = load_model(a.model);
  const TrajectoryRecord tr = read_trajectory(a.input);
  const PipelineReport r = run_pipeline(tr, net, a.cfg);

  const json meta = s.meta();
  const auto file = s.write_document(a.name + ".report", report_json(r, a.timings), meta);

  Table observed;
  observed.columns = {"t", "u", "v", "x", "y", "z", "fu", "fv"};
  for (std::size_t i = 0; i < r.loop_raw.size(); ++i) {
    const Point3& p = tr.samples[i].pos;
    observed.rows.push_back({r.loop_times[i], r.loop_raw[i].x(), r.loop_raw[i].y(), p.x(), p.y(), p.z(),
                             r.loop_points[i].x(), r.loop_points[i].y()});
  }
  s.write_table(a.name + ".observed", observed, meta);
  s.write_table(a.name + ".fitted", curve_table(r.fit.model, r.plane, a.curve_samples), meta);
  Table predicted;
  predicted.columns = {"t", "x", "y", "z"};
  for (const auto& p : r.predicted_track) predicted.rows.push_back({p.t, p.pos.x(), p.pos.y(), p.pos.z()});
  s.write_table(a.name + ".predicted", predicted, meta);

  s.out() << "pipeline: family " << family_name(r.family) << (r.used_fallback ? " (residual fallback)" : "")
          << ", e2 " << r.fit.e2 << ", loop of " << r.loop_end << " samples -> " << file.string() << '\n';
  return kExitOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string report;
  std::string input;
  std::string name = "evaluation";
};

void setup_evaluate(CLI::App* sub, EvaluateArgs& a) {
  sub->add_option("--report", a.report, "Pipeline report JSON")->required();
  sub->add_option("--input", a.input, "Trajectory file with a ground-truth sidecar")->required();
  sub->add_option("--name", a.name, "Output file stem");
}

int cmd_evaluate(const Session& s, const EvaluateArgs& a) {
  const PipelineReport r = report_from_json(read_json(a.report));
  const TrajectoryRecord tr = read_trajectory(a.input);
  const Metrics m = evaluate(r, tr);
  const auto file = s.write_document(a.name, json{{"report", a.report}, {"input", a.input}, {"metrics", m}}, s.meta());
  s.out() << "evaluate: family " << (m.family_correct ? "correct" : "wrong") << ", a error " << m.a_rel_error
          << ", center error " << m.center_error << " m, mean track distance " << m.mean_track_distance
          << " m -> " << file.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"looptrack: tracking, classification and prediction of targets on repetitive planar paths"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values");
  app.set_version_flag("--version", std::string("looptrack ") + kToolVersion);
  app.require_subcommand(1);

  Global g;
  app.add_option("--seed", g.seed, "Seed for every stochastic step");
  app.add_option("--output", g.output, "Output directory");
  app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  SimulateArgs sim_args;
  TrackArgs track_args;
  PredictArgs predict_args;
  TrainArgs train_args;
  ClassifyArgs classify_args;
  FitArgs fit_args;
  PipelineArgs pipeline_args;
  EvaluateArgs evaluate_args;
  auto* sim = app.add_subcommand("simulate", "Simulate a target flying a curve");
  setup_simulate(sim, sim_args);
  auto* trk = app.add_subcommand("track", "Filter a trajectory with the curvature EKF");
  setup_track(trk, track_args);
  auto* pred = app.add_subcommand("predict", "Predict waypoints from filtered states");
  setup_predict(pred, predict_args);
  auto* trn = app.add_subcommand("train", "Train the shape classifier on synthetic loops");
  setup_train(trn, train_args);
  auto* cls = app.add_subcommand("classify", "Classify the first loop of a trajectory");
  setup_classify(cls, classify_args);
  auto* fit = app.add_subcommand("fit", "Fit a curve to one loop");
  setup_fit(fit, fit_args);
  auto* pipe = app.add_subcommand("pipeline", "Plane alignment, classification, fit and track prediction");
  setup_pipeline(pipe, pipeline_args);
  auto* eval = app.add_subcommand("evaluate", "Score a pipeline report against ground truth");
  setup_evaluate(eval, evaluate_args);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  const Session s(app, g, args, out);
  try {
    if (*sim) return cmd_simulate(s, sim_args);
    if (*trk) return cmd_track(s, track_args);
    if (*pred) return cmd_predict(s, predict_args);
    if (*trn) return cmd_train(s, train_args);
    if (*cls) return cmd_classify(s, classify_args);
    if (*fit) return cmd_fit(s, fit_args);
    if (*pipe) return cmd_pipeline(s, pipeline_args);
    if (*eval) return cmd_evaluate(s, evaluate_args);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error (invalid input): " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace looptrack::cli
