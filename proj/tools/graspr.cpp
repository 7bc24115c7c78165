// graspr command-line tool.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

// Eigen headers must come before httplib.h.
#include "graspr/error.hpp"
#include "graspr/pipeline.hpp"
#include "graspr/service.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace graspr;

namespace {

std::string DefaultBundle() {
  if (const char* env = std::getenv("GRASPR_BUNDLE")) return env;
  return "data";
}

Eigen::VectorXd Labels(const FeatureTable& table, const std::vector<ChoiceRecord>& choices) {
  if (choices.empty()) return table.labels;
  std::map<std::string, bool> chosen;
  for (const ChoiceRecord& c : choices) {
    if (!chosen.emplace(c.pair_id, c.chose_a).second) {
      throw Error(ErrorCode::kConflict, fmt::format("pair '{}' has more than one choice", c.pair_id));
    }
  }
  Eigen::VectorXd y = Eigen::VectorXd::Constant(table.x.rows(), std::numeric_limits<double>::quiet_NaN());
  std::size_t matched = 0;
  for (std::size_t i = 0; i < table.pair_ids.size(); ++i) {
    const auto it = chosen.find(table.pair_ids[i]);
    if (it != chosen.end()) {
      y[static_cast<Eigen::Index>(i)] = it->second ? 1.0 : 0.0;
      ++matched;
    }
  }
  if (matched != chosen.size()) {
    for (const auto& [id, _] : chosen) {
      if (std::find(table.pair_ids.begin(), table.pair_ids.end(), id) == table.pair_ids.end()) {
        throw Error(ErrorCode::kDanglingReference, fmt::format("choice references unknown pair '{}'", id));
      }
    }
  }
  return y;
}

std::vector<GraspScene> LoadScenes(const std::vector<std::string>& files) {
  std::vector<GraspScene> scenes;
  for (const std::string& f : files) scenes.push_back(LoadScene(f));
  return scenes;
}

/// Scene file recorded by `simulate`, as given or relative to the clouds dir.
fs::path ResolveSceneFile(const fs::path& clouds, const std::string& recorded) {
  if (fs::exists(recorded)) return recorded;
  if (fs::exists(clouds / recorded)) return clouds / recorded;
  throw Error(ErrorCode::kNotFound, fmt::format("scene file '{}' recorded in '{}' not found", recorded, clouds.string()));
}

struct CloudDir {
  std::vector<GraspScene> scenes;
  double step_deg = 5.0;
  double alpha = 0.1;
};

CloudDir ReadCloudDir(const fs::path& clouds, const std::vector<std::string>& scene_files) {
  CloudDir d;
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(clouds)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 13 && name.ends_with(".summary.json")) summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty()) throw Error(ErrorCode::kNotFound, fmt::format("no cloud summaries in '{}'", clouds.string()));
  std::vector<CloudSummaryHeader> headers;
  for (const fs::path& p : summaries) headers.push_back(CloudSummaryFromJson(ReadTextFile(p)));
  d.step_deg = headers.front().step_deg;
  d.alpha = headers.front().alpha;
  for (const CloudSummaryHeader& h : headers) {
    if (h.step_deg != d.step_deg || h.alpha != d.alpha) {
      throw Error(ErrorCode::kInvalidArgument, "clouds in one directory must share step and alpha");
    }
  }
  if (!scene_files.empty()) {
    d.scenes = LoadScenes(scene_files);
  } else {
    for (const CloudSummaryHeader& h : headers) d.scenes.push_back(LoadScene(ResolveSceneFile(clouds, h.scene_file)));
  }
  return d;
}

std::unique_ptr<Study> MakeCloudStudy(const CloudDir& d, const fs::path& clouds, std::optional<EmgModel> emg) {
  Study::Options o;
  o.simulation.step = DegToRad(d.step_deg);
  o.simulation.alpha = d.alpha;
  o.features.geometric_only = !emg.has_value();
  o.cloud_cache = clouds;
  for (const GraspScene& s : d.scenes) {
    if (!fs::exists(clouds / (s.id + ".clouds.csv"))) {
      throw Error(ErrorCode::kNotFound, fmt::format("no clouds for scene '{}' in '{}'", s.id, clouds.string()));
    }
  }
  return std::make_unique<Study>(d.scenes, std::move(emg), o);
}

void Emit(const std::optional<std::string>& path, const std::string& text) {
  if (path && *path != "-") {
    WriteTextFile(*path, text);
  } else {
    std::cout << text;
  }
}

ReachTask ParseTask(const Bundle& bundle, const Study& study, const std::string& spec) {
  for (const TargetPoint& t : bundle.targets)
    if (t.id == spec) return study.Task(t);
  // "<scene>/<finger>/<sample>" addresses any cloud sample.
  const auto a = spec.find('/'), b = spec.rfind('/');
  if (a != std::string::npos && b != a) {
    const std::string tail = spec.substr(b + 1);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), ::isdigit)) {
      return study.SampleTask(spec.substr(0, a), FingerFromString(spec.substr(a + 1, b - a - 1)), std::stoi(tail));
    }
  }
  throw Error(ErrorCode::kNotFound, fmt::format("unknown target '{}'", spec));
}

int RunServer(const std::string& bundle_dir, const std::string& host, int port) {
  Service service(LoadBundle(bundle_dir));
  httplib::Server server;
  const auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    const Response out = service.Handle(r);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  std::cerr << fmt::format("graspr serving {} on http://{}:{}\n", bundle_dir, host, port);
  if (!server.listen(host, port)) throw Error(ErrorCode::kIo, fmt::format("cannot listen on {}:{}", host, port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GrasPR: single-finger grasp interaction simulation and preference modeling"};
  app.require_subcommand(1);

  // simulate
  std::string sim_scene, sim_out;
  double sim_step = 5.0, sim_alpha = 0.1;
  bool sim_obj = false;
  auto* simulate = app.add_subcommand("simulate", "Sweep every finger of a scene and write its reach clouds");
  simulate->add_option("--scene", sim_scene, "Scene JSON file")->required();
  simulate->add_option("--step", sim_step, "Joint sweep step in degrees")->capture_default_str();
  simulate->add_option("--alpha", sim_alpha, "Alpha-shape probe radius in meters")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_flag("--obj", sim_obj, "Also write one OBJ point cloud per finger");

  // sample
  std::string smp_clouds, smp_out, smp_pairs;
  std::vector<std::string> smp_scenes;
  std::uint64_t smp_seed = 7;
  RegionConfig smp_regions;
  auto* sample = app.add_subcommand("sample", "Extract regions, draw one target per region and pair them");
  sample->add_option("--clouds", smp_clouds, "Directory written by simulate")->required();
  sample->add_option("--scene", smp_scenes, "Scene files (default: those recorded with the clouds)");
  sample->add_option("--seed", smp_seed)->capture_default_str();
  sample->add_option("--out", smp_out, "Targets CSV")->required();
  sample->add_option("--pairs", smp_pairs, "Pairs CSV (default: pairs.csv next to the targets)");
  sample->add_option("--near-fraction", smp_regions.near_fraction)->capture_default_str();
  sample->add_option("--near-cap", smp_regions.near_cap, "meters")->capture_default_str();
  sample->add_option("--far-fraction", smp_regions.far_fraction)->capture_default_str();

  // features
  std::vector<std::string> ft_scenes;
  std::string ft_clouds, ft_targets, ft_pairs, ft_choices, ft_emg, ft_out;
  bool ft_geometric = false;
  auto* features = app.add_subcommand("features", "Delta features for every pair");
  features->add_option("--scene", ft_scenes, "Scene files (default: those recorded with the clouds)");
  features->add_option("--clouds", ft_clouds, "Directory written by simulate")->required();
  features->add_option("--targets", ft_targets)->required();
  features->add_option("--pairs", ft_pairs, "Pairs CSV (default: all within-scene pairs of the targets)");
  features->add_option("--choices", ft_choices, "Choice CSV used to fill the choice column");
  features->add_option("--emg", ft_emg, "EMG model JSON");
  features->add_flag("--geometric-only", ft_geometric, "Compute without an EMG model (vemg_abs_sum = 0)");
  features->add_option("--out", ft_out)->required();

  // fit
  std::string fit_features, fit_choices, fit_out, fit_report, fit_reduced;
  std::optional<double> fit_l2, fit_l1;
  FitConfig fit_cfg;
  bool fit_train_stats = false;
  auto* fit = app.add_subcommand("fit", "Fit the logistic preference model");
  fit->add_option("--features", fit_features)->required();
  fit->add_option("--choices", fit_choices, "Choice CSV (overrides the choice column)");
  fit->add_option("--l2", fit_l2, "Ridge strength (default 1)");
  fit->add_option("--l1", fit_l1, "Lasso strength");
  fit->add_option("--split", fit_cfg.test_fraction, "Test fraction")->capture_default_str();
  fit->add_option("--folds", fit_cfg.folds)->capture_default_str();
  fit->add_option("--seed", fit_cfg.seed)->capture_default_str();
  fit->add_flag("--train-stats", fit_train_stats, "Standardize the test split with training statistics");
  fit->add_option("--out", fit_out, "Model JSON")->required();
  fit->add_option("--report", fit_report, "Report JSON");
  fit->add_option("--reduced", fit_reduced, "Also refit on significant features; report JSON path");

  // predict
  std::string pr_model, pr_bundle = DefaultBundle();
  std::vector<std::string> pr_pair;
  auto* predict = app.add_subcommand("predict", "Probability that target A is preferred over target B");
  predict->add_option("--model", pr_model, "Model JSON (default: the bundle's)");
  predict->add_option("--bundle", pr_bundle)->capture_default_str();
  predict->add_option("--pair", pr_pair, "Target ids A B (or <scene>/<finger>/<sample>)")->required()->expected(2);

  // field
  std::string fd_model, fd_bundle = DefaultBundle(), fd_ref, fd_out, fd_csv;
  int fd_stride = 1;
  auto* field = app.add_subcommand("field", "Preference heat map of a finger's cloud against a reference task");
  field->add_option("--model", fd_model, "Model JSON (default: the bundle's)");
  field->add_option("--bundle", fd_bundle)->capture_default_str();
  field->add_option("--reference", fd_ref, "Reference target id (or <scene>/<finger>/<sample>)")->required();
  field->add_option("--stride", fd_stride, "Use every n-th cloud sample")->capture_default_str();
  field->add_option("--out", fd_out, "Colored OBJ")->required();
  field->add_option("--csv", fd_csv, "Also write sample,x,y,z,score CSV");

  // latin-square
  int ls_n = 4;
  auto* latin = app.add_subcommand("latin-square", "Balanced Latin square for n conditions");
  latin->add_option("--n", ls_n)->capture_default_str();

  // serve
  std::string sv_bundle = "data", sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the JSON API (GRASPR_BUNDLE and GRASPR_PORT override)");
  serve->add_option("--bundle", sv_bundle)->capture_default_str();
  serve->add_option("--port", sv_port)->capture_default_str();
  serve->add_option("--host", sv_host)->capture_default_str();

  // make-examples
  std::string mk_out = "data";
  ExampleBundleOptions mk_opts;
  auto* make = app.add_subcommand("make-examples", "Write the example bundle");
  make->add_option("--out", mk_out)->capture_default_str();
  make->add_option("--seed", mk_opts.seed)->capture_default_str();
  make->add_option("--step", mk_opts.step_deg, "degrees")->capture_default_str();
  make->add_flag("--keep-clouds", mk_opts.keep_clouds, "Keep the simulated clouds in the bundle");

  // train-emg
  std::string te_data, te_out, te_report;
  std::size_t te_synthetic = 0;
  EmgTrainConfig te_cfg;
  auto* train = app.add_subcommand("train-emg", "Train the pose-to-sEMG regressor");
  train->add_option("--data", te_data, "EMG dataset CSV (22 angle + 10 emg columns)");
  train->add_option("--synthetic", te_synthetic, "Train on n synthetic forearm samples instead");
  train->add_option("--epochs", te_cfg.epochs)->capture_default_str();
  train->add_option("--batch", te_cfg.batch_size)->capture_default_str();
  train->add_option("--lr", te_cfg.learning_rate)->capture_default_str();
  train->add_option("--holdout", te_cfg.holdout_fraction)->capture_default_str();
  train->add_option("--seed", te_cfg.seed)->capture_default_str();
  train->add_option("--out", te_out)->required();
  train->add_option("--report", te_report, "Training report JSON");

  // synth-choices
  std::string sc_model, sc_features, sc_pairs, sc_out, sc_participant = "synthetic";
  std::uint64_t sc_seed = 7;
  auto* synth = app.add_subcommand("synth-choices", "Simulate one forced choice per pair from a model");
  synth->add_option("--model", sc_model)->required();
  synth->add_option("--features", sc_features)->required();
  synth->add_option("--pairs", sc_pairs)->required();
  synth->add_option("--seed", sc_seed)->capture_default_str();
  synth->add_option("--participant", sc_participant)->capture_default_str();
  synth->add_option("--out", sc_out)->required();

  // pretrained
  std::string pt_bundle = DefaultBundle(), pt_table, pt_out;
  auto* pretrained = app.add_subcommand("pretrained", "Build the pretrained model from the published odds ratios");
  pretrained->add_option("--bundle", pt_bundle, "Bundle whose targets give the reference statistics")
      ->capture_default_str();
  pretrained->add_option("--table", pt_table, "Odds-ratio JSON (default: the bundle's)");
  pretrained->add_option("--out", pt_out)->required();

  // select
  std::string sl_features, sl_choices, sl_out;
  SelectionConfig sl_cfg;
  auto* select = app.add_subcommand("select", "Feature screening report");
  select->add_option("--features", sl_features)->required();
  select->add_option("--choices", sl_choices);
  select->add_option("--alpha", sl_cfg.alpha)->capture_default_str();
  select->add_option("--spearman", sl_cfg.spearman_threshold)->capture_default_str();
  select->add_option("--vif", sl_cfg.vif_threshold)->capture_default_str();
  select->add_option("--lasso", sl_cfg.lasso_lambda)->capture_default_str();
  select->add_option("--out", sl_out);

  // ratios
  std::string rt_choices, rt_targets, rt_out;
  auto* ratios = app.add_subcommand("ratios", "Preference ratio per finger and region");
  ratios->add_option("--choices", rt_choices)->required();
  ratios->add_option("--targets", rt_targets)->required();
  ratios->add_option("--out", rt_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) {
      const GraspScene scene = LoadScene(sim_scene);
      SimulationConfig cfg;
      cfg.step = DegToRad(sim_step);
      cfg.alpha = sim_alpha;
      const std::vector<ReachCloud> clouds = SimulateScene(scene, cfg);
      const fs::path out = sim_out;
      WriteTextFile(out / (scene.id + ".clouds.csv"), CloudsToCsv(clouds));
      WriteTextFile(out / (scene.id + ".summary.json"),
                    CloudSummaryToJson({scene.id, sim_scene, sim_step, sim_alpha}, clouds));
      if (sim_obj) {
        for (const ReachCloud& c : clouds) {
          if (c.samples.empty()) continue;
          WriteTextFile(out / fmt::format("{}.{}.obj", scene.id, ToString(c.finger)), PointsToObj(c.positions()));
        }
      }
      for (const ReachCloud& c : clouds) {
        std::cout << fmt::format("{} {}: {} samples, volume {:.6g} m^3 ({})\n", scene.id, ToString(c.finger),
                                 c.samples.size(), c.volume, ToString(c.volume_source));
        for (const std::string& w : c.warnings) std::cerr << "warning: " << w << "\n";
      }
    } else if (*sample) {
      const CloudDir d = ReadCloudDir(smp_clouds, smp_scenes);
      const auto study = MakeCloudStudy(d, smp_clouds, std::nullopt);
      const StudyDesign design = SampleStudy(*study, smp_seed, smp_regions);
      WriteTextFile(smp_out, TargetsToCsv(design.targets));
      const fs::path pairs = smp_pairs.empty() ? fs::path(smp_out).parent_path() / "pairs.csv" : fs::path(smp_pairs);
      WriteTextFile(pairs, PairsToCsv(design.pairs));
      std::cout << fmt::format("{} targets, {} pairs\n", design.targets.size(), design.pairs.size());
    } else if (*features) {
      if (ft_emg.empty() && !ft_geometric) {
        throw Error(ErrorCode::kInvalidArgument, "missing EMG model",
                    "pass --emg <model.json> or --geometric-only");
      }
      const CloudDir d = ReadCloudDir(ft_clouds, ft_scenes);
      std::optional<EmgModel> emg;
      if (!ft_emg.empty()) emg = EmgModelFromJson(ReadTextFile(ft_emg));
      const auto study = MakeCloudStudy(d, ft_clouds, std::move(emg));
      const std::vector<TargetPoint> targets = TargetsFromCsv(ReadTextFile(ft_targets));
      const std::vector<TrialPair> pairs =
          ft_pairs.empty() ? PairTargets(targets) : PairsFromCsv(ReadTextFile(ft_pairs));
      const std::vector<ChoiceRecord> choices =
          ft_choices.empty() ? std::vector<ChoiceRecord>{} : ChoicesFromCsv(ReadTextFile(ft_choices));
      WriteTextFile(ft_out, FeaturesToCsv(ComputeFeatures(*study, targets, pairs, choices)));
    } else if (*fit) {
      if (fit_l1 && fit_l2) throw Error(ErrorCode::kInvalidArgument, "choose one of --l1 and --l2");
      fit_cfg.penalty = fit_l1 ? Penalty::kL1 : Penalty::kL2;
      fit_cfg.lambda = fit_l1 ? *fit_l1 : fit_l2.value_or(1.0);
      fit_cfg.independent_standardization = !fit_train_stats;
      FeatureTable table = FeaturesFromCsv(ReadTextFile(fit_features));
      if (!fit_choices.empty()) table.labels = Labels(table, ChoicesFromCsv(ReadTextFile(fit_choices)));
      const FeatureTable labeled = table.Labeled();
      const std::vector<std::string> names = FeatureNameList();
      const FitResult r = Fit(labeled.x, labeled.labels, names, fit_cfg);
      WriteTextFile(fit_out, ModelToJson(r.model));
      if (!fit_report.empty()) WriteTextFile(fit_report, FitReportToJson(r.report));
      std::cout << fmt::format("n = {}: test accuracy {:.4f}, CV accuracy {:.4f}, AUC {:.4f}\n",
                               labeled.x.rows(), r.report.test_accuracy, r.report.cv_accuracy, r.report.auc);
      for (const std::string& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
      if (!fit_reduced.empty()) {
        const FitResult red = FitReduced(labeled.x, labeled.labels, names, r.report, fit_cfg);
        WriteTextFile(fit_reduced, FitReportToJson(red.report));
        WriteTextFile(fs::path(fit_reduced).replace_extension(".model.json"), ModelToJson(red.model));
        std::cout << fmt::format("reduced ({} features): test accuracy {:.4f}, CV accuracy {:.4f}, AUC {:.4f}\n",
                                 red.model.features.size(), red.report.test_accuracy, red.report.cv_accuracy,
                                 red.report.auc);
      }
    } else if (*predict) {
      const Bundle bundle = LoadBundle(pr_bundle);
      const LogisticModel model = pr_model.empty() ? bundle.model : ModelFromJson(ReadTextFile(pr_model));
      const auto study = bundle.MakeStudy();
      const ReachTask a = ParseTask(bundle, *study, pr_pair[0]);
      const ReachTask b = ParseTask(bundle, *study, pr_pair[1]);
      std::cout << FormatDouble(model.PredictDelta(DeltaFeatures(a.features, b.features))) << "\n";
    } else if (*field) {
      const Bundle bundle = LoadBundle(fd_bundle);
      const LogisticModel model = fd_model.empty() ? bundle.model : ModelFromJson(ReadTextFile(fd_model));
      const auto study = bundle.MakeStudy();
      const ReachTask ref = ParseTask(bundle, *study, fd_ref);
      const FieldResult f = PreferenceFieldOf(*study, model, ref, fd_stride);
      WriteTextFile(fd_out, PointsToObj(f.points, f.scores));
      if (!fd_csv.empty()) {
        std::string csv = "#graspr-csv schema_version=1 kind=field\nsample,x,y,z,score\n";
        for (std::size_t i = 0; i < f.points.size(); ++i) {
          csv += fmt::format("{},{},{},{},{}\n", f.samples[i], f.points[i].x(), f.points[i].y(), f.points[i].z(),
                             f.scores[i]);
        }
        WriteTextFile(fd_csv, csv);
      }
      std::cout << fmt::format("{} points scored against {}\n", f.points.size(), ref.target.id);
    } else if (*latin) {
      for (const std::vector<int>& row : BalancedLatinSquare(ls_n)) std::cout << fmt::format("{}\n", fmt::join(row, " "));
    } else if (*serve) {
      if (const char* env = std::getenv("GRASPR_BUNDLE")) sv_bundle = env;
      if (const char* env = std::getenv("GRASPR_PORT")) sv_port = std::stoi(env);
      return RunServer(sv_bundle, sv_host, sv_port);
    } else if (*make) {
      WriteExampleBundle(mk_out, mk_opts);
      const Bundle b = LoadBundle(mk_out);
      std::cout << fmt::format("{}: {} scenes, {} targets, {} pairs\n", mk_out, b.scenes.size(), b.targets.size(),
                               b.pairs.size());
    } else if (*train) {
      if (te_data.empty() == (te_synthetic == 0)) {
        throw Error(ErrorCode::kInvalidArgument, "pass exactly one of --data and --synthetic");
      }
      const EmgDataset data = te_data.empty() ? SyntheticForearmDataset(DefaultSkeleton(), te_synthetic, te_cfg.seed)
                                              : EmgDatasetFromCsv(ReadTextFile(te_data));
      const EmgTrainResult r = TrainEmg(data, te_cfg);
      WriteTextFile(te_out, EmgModelToJson(r.model));
      std::cout << fmt::format("holdout MAE {:.4f}, MSE {:.4f}, R^2 {:.4f} after {} epochs\n", r.report.holdout.mae,
                               r.report.holdout.mse, r.report.holdout.r2, r.report.epochs_run);
      if (!te_report.empty()) {
        nlohmann::json j = {{"schema_version", kSchemaVersion},
                            {"kind", "emg_train_report"},
                            {"mae", r.report.holdout.mae},
                            {"mse", r.report.holdout.mse},
                            {"r2", r.report.holdout.r2},
                            {"epochs_run", r.report.epochs_run},
                            {"train_size", r.report.train_size},
                            {"holdout_size", r.report.holdout_size},
                            {"epoch_loss", r.report.epoch_loss},
                            {"epoch_r2", r.report.epoch_r2}};
        WriteTextFile(te_report, j.dump(2) + "\n");
      }
    } else if (*synth) {
      const LogisticModel model = ModelFromJson(ReadTextFile(sc_model));
      const FeatureTable table = FeaturesFromCsv(ReadTextFile(sc_features));
      const std::vector<TrialPair> pairs = PairsFromCsv(ReadTextFile(sc_pairs));
      WriteTextFile(sc_out, ChoicesToCsv(SimulateChoices(model, table, pairs, sc_seed, sc_participant)));
    } else if (*pretrained) {
      const Bundle bundle = LoadBundle(pt_bundle);
      const OddsRatioTable table =
          pt_table.empty() ? bundle.odds_ratios : OddsRatioTableFromJson(ReadTextFile(pt_table));
      const auto study = bundle.MakeStudy();
      std::vector<ReachTask> tasks;
      for (const TargetPoint& t : bundle.targets) tasks.push_back(study->Task(t));
      WriteTextFile(pt_out, ModelToJson(PretrainedModel(table, ReferenceStatistics(tasks))));
    } else if (*select) {
      FeatureTable table = FeaturesFromCsv(ReadTextFile(sl_features));
      if (!sl_choices.empty()) table.labels = Labels(table, ChoicesFromCsv(ReadTextFile(sl_choices)));
      const FeatureTable labeled = table.Labeled();
      const std::vector<std::string> names = FeatureNameList();
      const SelectionReport rep = SelectFeatures(labeled.x, labeled.labels, names, sl_cfg);
      Emit(sl_out.empty() ? std::nullopt : std::optional(sl_out), SelectionReportToJson(rep));
    } else if (*ratios) {
      const std::vector<ChoiceRecord> choices = ChoicesFromCsv(ReadTextFile(rt_choices));
      const std::vector<TargetPoint> targets = TargetsFromCsv(ReadTextFile(rt_targets));
      Emit(rt_out.empty() ? std::nullopt : std::optional(rt_out),
           PreferenceRatiosToJson(PreferenceRatios(choices, targets)));
    }
  } catch (const Error& e) {
    std::cerr << ErrorJson(e) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << ErrorJson(Error(ErrorCode::kIo, "unexpected failure", e.what())) << "\n";
    return 2;
  }
  return 0;
}
