// scnn: generate, sample, train, cv, cam, verify.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scnn/checks.hpp"
#include "scnn/config.hpp"

namespace fs = std::filesystem;
using namespace scnn;

namespace {

enum Exit { ok = 0, usage = 1, invalid = 2, numeric = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string precision = "f32";
};

// Appends timestamped lines to <dir>/run.log; the only nondeterministic output.
class RunLog {
public:
  explicit RunLog(const std::string& dir) : path_((fs::path(dir) / "run.log").string()) {}

  void operator()(const std::string& msg) const {
    std::ofstream out(path_, std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    out << stamp << " " << msg << "\n";
  }

private:
  std::string path_;
};

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  detail::write_file((fs::path(dir) / name).string(), text);
}

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.cohort.seed = c.seed;
  c.train.seed = c.seed;
  return c;
}

template <class F>
int with_precision(const Globals& g, F&& body) {
  if (g.precision == "f64") return body(double{});
  return body(float{});
}

std::string base_dir_of(const std::string& manifest) {
  auto p = fs::path(manifest).parent_path();
  return p.empty() ? "." : p.string();
}

int cmd_generate(const RunConfig& cfg, RunLog& log) {
  cfg.cohort.validate();
  auto subjects = generate_cohort(cfg.cohort);
  write_cohort(subjects, cfg.output);
  write_text(cfg.output, "generate.cfg", config_text(cfg));
  log("generate: " + std::to_string(subjects.size()) + " subjects at b=" + std::to_string(cfg.cohort.bandwidth));
  std::printf("wrote %zu subjects to %s\n", subjects.size(), cfg.output.c_str());
  return ok;
}

int cmd_sample(const RunConfig& cfg, const std::string& input, const std::string& hemi, const std::string& out_path, int bandwidth) {
  const Hemisphere h = hemi == "right" ? Hemisphere::right : Hemisphere::left;
  RegisteredSurface s;
  std::ifstream probe(input, std::ios::binary);
  char magic[4] = {};
  probe.read(magic, 4);
  if (probe && std::string(magic, 4) == "SRFM") s = load_surface(input);
  else s = import_text_surface(input, h);
  if (bandwidth <= 0) bandwidth = cfg.models().spherical.input_bandwidth;
  auto grid_signal = sample_to_grid(s, make_grid(bandwidth), cfg.sample_k);
  save_sphere_signal(grid_signal, h, out_path);
  std::printf("sampled %zu vertices onto a %dx%d grid -> %s\n", s.vertices.size(), 2 * bandwidth, 2 * bandwidth, out_path.c_str());
  return ok;
}

struct TaskData {
  std::vector<SubjectRecord> rows;
  std::vector<Example> examples;
  FoldPlan plan;
};

TaskData load_task(const RunConfig& cfg, int bandwidth) {
  if (cfg.manifest.empty()) throw ValidationError("no manifest given (config key 'manifest' or --manifest)");
  TaskData d;
  d.examples = load_task_examples(load_manifest(cfg.manifest), base_dir_of(cfg.manifest), parse_task(cfg.task), bandwidth, &d.rows);
  if (d.examples.size() < static_cast<std::size_t>(cfg.folds)) throw ValidationError("fewer task subjects than folds");
  d.plan = stratified_kfold(d.rows, cfg.folds, cfg.seed);
  return d;
}

std::vector<Architecture> selected_architectures(const RunConfig& cfg) {
  const Preset p = cfg.models();
  if (cfg.model == "spherical") return {p.spherical};
  if (cfg.model == "planar") return {p.planar};
  return {p.spherical, p.planar};
}

template <class T>
int cmd_train(const RunConfig& cfg, RunLog& log) {
  const Architecture arch = selected_architectures(cfg).front();
  auto data = load_task(cfg, arch.input_bandwidth);
  std::vector<const Example*> tr, va;
  for (std::size_t i = 0; i < data.examples.size(); ++i) (data.plan.fold[i] == 0 ? va : tr).push_back(&data.examples[i]);
  log("train: " + to_string(arch.kind) + " on " + std::to_string(tr.size()) + " subjects, validation " + std::to_string(va.size()));
  auto res = train(build_model<T>(arch, cfg.seed), tr, va, cfg.train);
  save_model(res.best, (fs::path(cfg.output) / "model.scnn").string());
  write_text(cfg.output, "history.csv", history_csv(res.history));
  char line[128];
  std::snprintf(line, sizeof line, "best_epoch,%d\nbest_val_acc,%.17g\nparameters,%zu\n", res.best_epoch, res.best_val_acc,
                count_parameters(res.best));
  write_text(cfg.output, "train_report.csv", line);
  std::printf("best epoch %d, validation accuracy %.4f\n", res.best_epoch, res.best_val_acc);
  return ok;
}

template <class T>
int cmd_cv(const RunConfig& cfg, RunLog& log) {
  const auto archs = selected_architectures(cfg);
  auto data = load_task(cfg, archs.front().input_bandwidth);
  std::vector<SubjectRecord> with_folds = data.rows;
  for (std::size_t i = 0; i < with_folds.size(); ++i) with_folds[i].fold = data.plan.fold[i];
  write_text(cfg.output, "folds.csv", manifest_csv(with_folds));
  write_text(cfg.output, "fold_summary.csv", fold_summary_csv(data.plan, data.rows));
  std::vector<std::string> ids;
  for (const auto& r : data.rows) ids.push_back(r.id);

  std::vector<std::pair<std::string, CvResult>> results;
  if (cfg.dry_run) {
    std::vector<double> p;
    std::vector<int> y;
    for (const auto& e : data.examples) {
      p.push_back(e.label);
      y.push_back(e.label);
    }
    results.emplace_back("oracle", summarize(p, y));
  } else {
    for (const auto& arch : archs) {
      log("cv: " + to_string(arch.kind) + " " + to_string(parse_task(cfg.task)) + ", " + std::to_string(cfg.folds) + " folds");
      results.emplace_back(to_string(arch.kind), cross_validate<T>(data.examples, data.plan, arch, cfg.train, cfg.seed));
    }
  }
  std::vector<std::pair<std::string, RocResult>> curves;
  std::string table = "model       AUC    ACC    SEN    SPE\n";
  for (const auto& [name, r] : results) {
    write_text(cfg.output, name + "_report.csv", cv_report(name, r));
    write_text(cfg.output, name + "_roc.csv", roc_csv(r.roc));
    write_text(cfg.output, name + "_probabilities.csv", probabilities_csv(ids, r));
    std::string hist = "fold,epoch,train_loss,val_acc,lr\n";
    for (const auto& f : r.folds) {
      const std::string csv = history_csv(f.history);
      std::size_t pos = csv.find('\n') + 1;
      while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        hist += std::to_string(f.fold) + "," + csv.substr(pos, end - pos + 1);
        pos = end + 1;
      }
    }
    if (!r.folds.empty()) write_text(cfg.output, name + "_history.csv", hist);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %.3f %5.1f%% %5.1f%% %5.1f%%\n", name.c_str(), r.roc.auc, 100 * r.metrics.accuracy,
                  100 * r.metrics.sensitivity, 100 * r.metrics.specificity);
    table += line;
    curves.emplace_back(name, r.roc);
  }
  write_text(cfg.output, "roc.svg", roc_svg(curves));
  write_text(cfg.output, "table.txt", table);
  std::cout << table;
  return ok;
}

template <class T>
int cmd_cam(const RunConfig& cfg, RunLog& log) {
  if (cfg.checkpoint.empty()) throw ValidationError("no checkpoint given (config key 'checkpoint' or --checkpoint)");
  if (!fs::exists(cfg.checkpoint)) throw ValidationError("checkpoint not found: " + cfg.checkpoint);
  auto model = load_model<T>(cfg.checkpoint);
  if (cfg.manifest.empty()) throw ValidationError("no manifest given");
  const auto rows = load_manifest(cfg.manifest);
  const SubjectRecord* rec = nullptr;
  for (const auto& r : rows)
    if (r.id == cfg.subject) rec = &r;
  if (!rec) throw ValidationError("subject '" + cfg.subject + "' not in manifest");
  const std::string base = base_dir_of(cfg.manifest);
  auto path = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (fs::path(base) / p).string(); };
  auto ex = to_example(load_sphere_signal(path(rec->left_path)).signal, load_sphere_signal(path(rec->right_path)).signal, 0);
  auto cams = compute_cam(model, ex, cfg.class_index);
  const std::string stem = "cam_" + rec->id;
  save_sphere_signal(cams.left.to_signal(), Hemisphere::left, (fs::path(cfg.output) / (stem + "_L.sphs")).string());
  save_sphere_signal(cams.right.to_signal(), Hemisphere::right, (fs::path(cfg.output) / (stem + "_R.sphs")).string());
  write_text(cfg.output, stem + "_L.ppm", cam_ppm(cams.left));
  write_text(cfg.output, stem + "_R.ppm", cam_ppm(cams.right));
  const auto peak = cam_argmax(cams);
  double nearest = -1.0;
  for (const auto& s : cfg.cohort.sites)
    if (s.hemisphere == peak.hemisphere) {
      const double d = angle_between(s.center, peak.point) * 180.0 / pi;
      nearest = nearest < 0 ? d : std::min(nearest, d);
    }
  char line[256];
  std::snprintf(line, sizeof line, "subject,%s\nclass,%d\nhemisphere,%s\nalpha_index,%d\nbeta_index,%d\nnearest_site_deg,%.17g\n",
                rec->id.c_str(), cfg.class_index, peak.hemisphere == Hemisphere::left ? "left" : "right", peak.alpha, peak.beta, nearest);
  write_text(cfg.output, stem + ".csv", line);
  log("cam: " + rec->id);
  std::printf("CAM argmax on %s hemisphere, %.1f deg from the nearest site\n", peak.hemisphere == Hemisphere::left ? "left" : "right",
              nearest);
  return ok;
}

int cmd_verify(const RunConfig& cfg, bool sabotage, bool smoke) {
  const RotationOptions opt{sabotage};
  int failures = 0;
  auto report = [&](const char* name, double err, double tol) {
    const bool pass = err < tol;
    failures += !pass;
    std::printf("%s %-26s max error %.3e (limit %.0e)\n", pass ? "PASS" : "FAIL", name, err, tol);
  };
  const std::vector<int> bands = smoke ? std::vector<int>{2} : std::vector<int>{2, 4, 8, 16};
  double sht = 0.0, so3 = 0.0;
  for (int b : bands) {
    sht = std::max(sht, sht_roundtrip_error(b, cfg.seed));
    so3 = std::max(so3, so3_roundtrip_error(b, cfg.seed));
  }
  report("sht roundtrip", sht, 1e-9);
  report("so3 roundtrip", so3, 1e-9);
  report("wigner orthogonality", wigner_orthogonality_error(smoke ? 4 : 32), 1e-10);

  const Preset p = smoke ? Preset{spherical_architecture(2, {{2, 2}, {2, 2}}), planar_architecture(2, {2, 2})} : cfg.models();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xe9));
  const auto& L = p.spherical.layers;
  S2ConvLayer s2(1, L[0].channels, p.spherical.input_bandwidth, L[0].bandwidth);
  init_s2_kernel(s2, rng);
  double e_s2 = 0.0, e_so3 = 0.0;
  const int pairs = smoke ? 2 : 5;
  for (int t = 0; t < pairs; ++t) e_s2 = std::max(e_s2, s2_equivariance_error(s2, derive_seed(cfg.seed, 0xe5, t), opt));
  for (std::size_t i = 1; i < L.size(); ++i) {
    SO3ConvLayer so(L[i - 1].channels, L[i].channels, L[i - 1].bandwidth, L[i].bandwidth);
    init_so3_kernel(so, rng);
    for (int t = 0; t < pairs; ++t) e_so3 = std::max(e_so3, so3_equivariance_error(so, derive_seed(cfg.seed, 0xe6, t), opt));
  }
  report("s2conv equivariance", e_s2, 1e-6);
  report("so3conv equivariance", e_so3, 1e-6);

  const Preset tiny = smoke ? p : tiny_preset();
  report("gradient (spherical)", model_gradient_check(tiny.spherical, 1).max_relative_error, 1e-5);
  report("gradient (planar)", model_gradient_check(tiny.planar, 1).max_relative_error, 1e-5);
  report("auc vs pairwise", auc_oracle_error(smoke ? 10 : 100, smoke ? 50 : 500, cfg.seed), 1e-12);
  std::printf("%s\n", failures ? "verify: FAILED" : "verify: all checks passed");
  return failures ? numeric : ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical CNNs on two-hemisphere cortical signals"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "flat key = value run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "overrides the configured seed");
  app.add_option("--threads", g.threads, "worker thread cap (0 = hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--precision", g.precision, "activation precision")->check(CLI::IsMember({"f32", "f64"}));

  std::string output, manifest, model_kind, checkpoint, subject, input, hemisphere = "left", sample_out;
  int class_index = -1, bandwidth = 0;
  bool dry_run = false, sabotage = false, smoke = false;

  auto* gen = app.add_subcommand("generate", "write a synthetic cohort and manifest");
  gen->add_option("--output", output, "output directory");

  auto* smp = app.add_subcommand("sample", "resample a registered surface onto the grid");
  smp->add_option("--input", input, "surface file (SRFM or 'x y z thickness' text)")->required()->check(CLI::ExistingFile);
  smp->add_option("--hemisphere", hemisphere)->check(CLI::IsMember({"left", "right"}));
  smp->add_option("--output", sample_out, "SphereSignal file to write")->required();
  smp->add_option("--bandwidth", bandwidth, "grid bandwidth (default: preset input bandwidth)");

  auto* trn = app.add_subcommand("train", "train one model with fold 0 as validation");
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  auto* cam = app.add_subcommand("cam", "class activation maps for one subject");
  for (auto* sc : {trn, cv, cam}) {
    sc->add_option("--manifest", manifest);
    sc->add_option("--output", output);
  }
  for (auto* sc : {trn, cv}) sc->add_option("--model", model_kind)->check(CLI::IsMember({"spherical", "planar", "both"}));
  cv->add_flag("--dry-run", dry_run, "oracle probabilities instead of training");
  cam->add_option("--checkpoint", checkpoint);
  cam->add_option("--subject", subject);
  cam->add_option("--class", class_index);

  auto* ver = app.add_subcommand("verify", "property checks with measured errors");
  ver->add_flag("--sabotage", sabotage, "flip one Wigner sign; equivariance must fail");
  ver->add_flag("--smoke", smoke, "b=2 quick run");

  for (auto* sc : app.get_subcommands({})) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    set_num_threads(g.threads);
    RunConfig cfg = resolve(g);
    if (!output.empty()) cfg.output = output;
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!model_kind.empty()) cfg.model = model_kind;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!subject.empty()) cfg.subject = subject;
    if (class_index >= 0) cfg.class_index = class_index;
    if (dry_run) cfg.dry_run = true;
    cfg.validate();

    if (*smp) return cmd_sample(cfg, input, hemisphere, sample_out, bandwidth);
    if (*ver) return cmd_verify(cfg, sabotage, smoke);
    make_dir(cfg.output);
    RunLog log(cfg.output);
    log("start " + app.get_subcommands().front()->get_name() + " seed=" + std::to_string(cfg.seed) + " precision=" + g.precision);
    int rc = ok;
    if (*gen) rc = cmd_generate(cfg, log);
    else if (*trn) rc = with_precision(g, [&](auto t) { return cmd_train<decltype(t)>(cfg, log); });
    else if (*cv) rc = with_precision(g, [&](auto t) { return cmd_cv<decltype(t)>(cfg, log); });
    else if (*cam) rc = with_precision(g, [&](auto t) { return cmd_cam<decltype(t)>(cfg, log); });
    log("done");
    return rc;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return numeric;
  } catch (const InternalError& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return numeric;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return invalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return invalid;
  }
}
