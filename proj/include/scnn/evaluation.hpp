#pragma once

// Stratified k-fold plans, ROC/AUC and threshold metrics, the cross-validation
// protocol, spherical class activation maps, and their file renderings.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "scnn/cohort.hpp"
#include "scnn/train.hpp"

namespace scnn {

struct FoldPlan {
  int k = 0;
  std::vector<int> fold;  // per subject

  std::vector<std::size_t> members(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(i);
    return out;
  }
};

// Strata are (class, gender, age tercile within the class x gender cell).
// Each stratum is shuffled from its own seed and the strata, in key order, are
// dealt round-robin with one running counter, so every class is spread over
// the folds as evenly as possible.
inline FoldPlan stratified_kfold(const std::vector<SubjectRecord>& subjects, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  std::map<std::pair<int, char>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < subjects.size(); ++i)
    cells[{static_cast<int>(subjects[i].label), subjects[i].gender}].push_back(i);
  std::map<std::tuple<int, char, int>, std::vector<std::size_t>> strata;
  for (auto& [key, idx] : cells) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return subjects[a].age < subjects[b].age || (subjects[a].age == subjects[b].age && a < b);
    });
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const int tercile = static_cast<int>(3 * r / idx.size());
      strata[{key.first, key.second, tercile}].push_back(idx[r]);
    }
  }
  FoldPlan plan{k, std::vector<int>(subjects.size(), -1)};
  std::size_t counter = 0;
  for (auto& [key, idx] : strata) {
    const auto [cls, gender, tercile] = key;
    std::mt19937_64 rng(derive_seed(seed, 0xf01d, static_cast<std::uint64_t>(cls * 1000 + gender * 10 + tercile)));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) plan.fold[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
  }
  return plan;
}

// Per-fold class and gender counts and mean age.
inline std::string fold_summary_csv(const FoldPlan& plan, const std::vector<SubjectRecord>& rows) {
  std::string out = "fold,subjects,CN,MCI-s,MCI-p,AD,male,female,mean_age\n";
  char line[160];
  for (int f = 0; f < plan.k; ++f) {
    std::array<int, 4> cls{};
    int male = 0, n = 0;
    double age = 0.0;
    for (std::size_t i : plan.members(f)) {
      ++cls[static_cast<std::size_t>(rows[i].label)];
      male += rows[i].gender == 'M';
      age += rows[i].age;
      ++n;
    }
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%d,%d,%d,%d,%.17g\n", f, n, cls[0], cls[1], cls[2], cls[3], male, n - male,
                  n ? age / n : 0.0);
    out += line;
  }
  return out;
}

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr) from (0,0) to (1,1)
  double auc = 0.0;
};

// Threshold sweep over the unique scores (descending); trapezoidal area.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: scores and labels differ in length");
  const std::size_t P = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t N = labels.size() - P;
  if (P == 0 || N == 0) throw UndefinedMetricError("roc_auc: need at least one positive and one negative");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocResult r;
  r.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
    r.points.emplace_back(static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P));
  }
  r.auc = area / (static_cast<double>(P) * static_cast<double>(N));
  return r;
}

struct ConfusionMetrics {
  double accuracy = 0.0, sensitivity = 0.0, specificity = 0.0;
};

// Positive iff probability >= threshold.
inline ConfusionMetrics confusion_metrics(const std::vector<double>& probs, const std::vector<int>& labels, double threshold = 0.5) {
  if (probs.size() != labels.size() || probs.empty()) throw std::invalid_argument("confusion_metrics: bad input sizes");
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pos = probs[i] >= threshold;
    if (labels[i] == 1) (pos ? tp : fn)++;
    else (pos ? fp : tn)++;
  }
  if (tp + fn == 0) throw UndefinedMetricError("confusion_metrics: sensitivity undefined without positives");
  if (tn + fp == 0) throw UndefinedMetricError("confusion_metrics: specificity undefined without negatives");
  return {static_cast<double>(tp + tn) / static_cast<double>(probs.size()), static_cast<double>(tp) / static_cast<double>(tp + fn),
          static_cast<double>(tn) / static_cast<double>(tn + fp)};
}

enum class Task { ad_vs_cn, mcip_vs_mcis };

inline Task parse_task(const std::string& s) {
  if (s == "AD-vs-CN" || s == "ad_vs_cn") return Task::ad_vs_cn;
  if (s == "MCIp-vs-MCIs" || s == "mcip_vs_mcis") return Task::mcip_vs_mcis;
  throw ValidationError("unknown task '" + s + "'");
}

inline std::string to_string(Task t) { return t == Task::ad_vs_cn ? "AD-vs-CN" : "MCIp-vs-MCIs"; }

// 1 = positive class of the task, 0 = negative, -1 = not part of the task.
inline int task_label(Task t, Diagnosis d) {
  if (t == Task::ad_vs_cn) return d == Diagnosis::AD ? 1 : d == Diagnosis::CN ? 0 : -1;
  return d == Diagnosis::MCI_p ? 1 : d == Diagnosis::MCI_s ? 0 : -1;
}

// One single-channel signal per hemisphere -> network input.
inline Example to_example(const SphereSignal& left, const SphereSignal& right, int label) {
  if (left.channels != 1 || right.channels != 1 || left.bandwidth != right.bandwidth)
    throw ValidationError("hemisphere signals must be single-channel with equal bandwidth");
  return {left.values, right.values, label};
}

// Subjects of the task's two classes with their binary labels; manifest
// paths are resolved against base_dir. kept receives the matching records.
inline std::vector<Example> load_task_examples(const std::vector<SubjectRecord>& rows, const std::string& base_dir, Task task,
                                               int bandwidth, std::vector<SubjectRecord>* kept = nullptr) {
  namespace fs = std::filesystem;
  std::vector<Example> out;
  for (const auto& r : rows) {
    const int y = task_label(task, r.label);
    if (y < 0) continue;
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (fs::path(base_dir) / p).string(); };
    auto L = load_sphere_signal(resolve(r.left_path));
    auto R = load_sphere_signal(resolve(r.right_path));
    if (L.hemisphere != Hemisphere::left || R.hemisphere != Hemisphere::right)
      throw ValidationError("subject " + r.id + ": hemisphere tags do not match the manifest columns");
    if (L.signal.bandwidth != bandwidth)
      throw ValidationError("subject " + r.id + ": signal bandwidth " + std::to_string(L.signal.bandwidth) + " but the model expects " +
                            std::to_string(bandwidth));
    out.push_back(to_example(L.signal, R.signal, y));
    if (kept) kept->push_back(r);
  }
  return out;
}

struct CvFold {
  int fold = 0;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  std::vector<EpochRecord> history;
};

struct CvResult {
  std::vector<double> probabilities;  // aggregated test-set P(positive), per subject
  std::vector<int> labels;
  RocResult roc;
  std::vector<double> shifted_probabilities;  // same models on the shifted test inputs, if given
  RocResult shifted_roc;
  ConfusionMetrics metrics;
  std::vector<CvFold> folds;
  std::vector<std::string> warnings;
};

inline CvResult summarize(std::vector<double> probs, std::vector<int> labels) {
  CvResult r;
  r.roc = roc_auc(probs, labels);
  r.metrics = confusion_metrics(probs, labels);
  r.probabilities = std::move(probs);
  r.labels = std::move(labels);
  return r;
}

// Fold i is the test set, fold (i+1) mod k the validation set, the rest train.
// Each fold trains from a fold-derived seed; folds run in parallel and are
// reduced in fold order. `shifted`, if given, holds a perturbed copy of every
// subject; each fold's selected model also scores its test subjects there.
template <class T>
CvResult cross_validate(const std::vector<Example>& data, const FoldPlan& plan, const Architecture& arch, const TrainConfig& cfg,
                        std::uint64_t seed, int threads = num_threads(), const std::vector<Example>* shifted = nullptr) {
  if (plan.fold.size() != data.size()) throw std::invalid_argument("cross_validate: plan does not match data");
  if (shifted && shifted->size() != data.size()) throw std::invalid_argument("cross_validate: shifted set does not match data");
  const int k = plan.k;
  if (k < 3) throw ValidationError("cross_validate: need at least 3 folds (test, validation, train)");
  std::vector<double> probs(data.size(), -1.0), shifted_probs(shifted ? data.size() : 0, -1.0);
  std::vector<CvFold> folds(static_cast<std::size_t>(k));
  std::vector<std::string> warn(static_cast<std::size_t>(k));
  parallel_for(
      static_cast<std::size_t>(k),
      [&](std::size_t fi) {
        const int f = static_cast<int>(fi), vf = (f + 1) % k;
        std::vector<const Example*> tr, va, te;
        std::vector<std::size_t> te_idx;
        for (std::size_t i = 0; i < data.size(); ++i) {
          if (plan.fold[i] == f) {
            te.push_back(&data[i]);
            te_idx.push_back(i);
          } else if (plan.fold[i] == vf) {
            va.push_back(&data[i]);
          } else {
            tr.push_back(&data[i]);
          }
        }
        bool has0 = false, has1 = false;
        for (auto* e : va) (e->label ? has1 : has0) = true;
        if (!(has0 && has1)) warn[fi] = "fold " + std::to_string(f) + ": validation set holds a single class";
        TrainConfig c = cfg;
        c.seed = derive_seed(seed, 0x7a1, fi);
        auto res = train(build_model<T>(arch, derive_seed(seed, 0x1417, fi)), tr, va, c);
        auto p = predict_positive(res.best, te);
        for (std::size_t j = 0; j < te.size(); ++j) probs[te_idx[j]] = p[j];
        if (shifted) {
          std::vector<const Example*> ts;
          for (std::size_t i : te_idx) ts.push_back(&(*shifted)[i]);
          auto q = predict_positive(res.best, ts);
          for (std::size_t j = 0; j < ts.size(); ++j) shifted_probs[te_idx[j]] = q[j];
        }
        folds[fi] = {f, res.best_epoch, res.best_val_acc, res.history};
      },
      threads);
  std::vector<int> labels;
  for (const auto& e : data) labels.push_back(e.label);
  CvResult r = summarize(std::move(probs), std::move(labels));
  if (shifted) {
    r.shifted_roc = roc_auc(shifted_probs, r.labels);
    r.shifted_probabilities = std::move(shifted_probs);
  }
  r.folds = std::move(folds);
  for (auto& w : warn)
    if (!w.empty()) r.warnings.push_back(w);
  return r;
}

struct RobustnessTrial {
  double spherical_auc = 0, spherical_rotated_auc = 0;
  double planar_auc = 0, planar_rotated_auc = 0;

  double spherical_drop() const { return spherical_auc - spherical_rotated_auc; }
  double planar_drop() const { return planar_auc - planar_rotated_auc; }
};

// Both models trained by k-fold CV on an AD-vs-CN cohort, then scored on the
// test subjects as generated and again with a fresh random misregistration
// (axis uniform, angle ~ N(0, rotation_std)) applied to each test subject.
template <class T>
RobustnessTrial rotation_robustness_trial(CohortSpec spec, const Preset& preset, const TrainConfig& cfg, int folds, double rotation_std,
                                          std::uint64_t seed, int threads = num_threads()) {
  spec.seed = seed;
  auto subjects = generate_cohort(spec, threads);
  std::vector<Example> plain(subjects.size()), rotated(subjects.size());
  std::vector<SubjectRecord> rows;
  parallel_for(
      subjects.size(),
      [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(seed, 0x707, i));
        const auto extra = random_misregistration(rng, rotation_std);
        const Subject r = generate_subject(spec, subjects[i].record.label, i, extra);
        const int y = task_label(Task::ad_vs_cn, subjects[i].record.label);
        plain[i] = to_example(subjects[i].left, subjects[i].right, y);
        rotated[i] = to_example(r.left, r.right, y);
      },
      threads);
  for (const auto& s : subjects) {
    if (task_label(Task::ad_vs_cn, s.record.label) < 0) throw ValidationError("robustness trial: cohort must hold only AD and CN");
    rows.push_back(s.record);
  }
  const FoldPlan plan = stratified_kfold(rows, folds, seed);
  RobustnessTrial t;
  auto sph = cross_validate<T>(plain, plan, preset.spherical, cfg, seed, threads, &rotated);
  auto pla = cross_validate<T>(plain, plan, preset.planar, cfg, seed, threads, &rotated);
  t.spherical_auc = sph.roc.auc;
  t.spherical_rotated_auc = sph.shifted_roc.auc;
  t.planar_auc = pla.roc.auc;
  t.planar_rotated_auc = pla.shifted_roc.auc;
  return t;
}

// Machine-readable report; identical inputs give identical bytes.
inline std::string cv_report(const std::string& name, const CvResult& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "model,%s\nauc,%.17g\naccuracy,%.17g\nsensitivity,%.17g\nspecificity,%.17g\nsubjects,%zu\n", name.c_str(),
                r.roc.auc, r.metrics.accuracy, r.metrics.sensitivity, r.metrics.specificity, r.probabilities.size());
  out += line;
  for (const auto& f : r.folds) {
    std::snprintf(line, sizeof line, "fold,%d,best_epoch,%d,best_val_acc,%.17g\n", f.fold, f.best_epoch, f.best_val_acc);
    out += line;
  }
  for (const auto& w : r.warnings) out += "warning," + w + "\n";
  return out;
}

inline std::string roc_csv(const RocResult& r) {
  std::string out = "fpr,tpr\n";
  char line[96];
  for (auto [x, y] : r.points) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", x, y);
    out += line;
  }
  return out;
}

inline std::string probabilities_csv(const std::vector<std::string>& ids, const CvResult& r) {
  std::string out = "subject_id,label,probability\n";
  char line[160];
  for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
    std::snprintf(line, sizeof line, "%s,%d,%.17g\n", ids[i].c_str(), r.labels[i], r.probabilities[i]);
    out += line;
  }
  return out;
}

// ROC curves (one per named result) with the chance diagonal.
inline std::string roc_svg(const std::vector<std::pair<std::string, RocResult>>& curves) {
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\" viewBox=\"-40 -20 420 420\">\n"
      "<rect x=\"0\" y=\"0\" width=\"360\" height=\"360\" fill=\"none\" stroke=\"black\"/>\n"
      "<line x1=\"0\" y1=\"360\" x2=\"360\" y2=\"0\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n"
      "<text x=\"150\" y=\"390\" font-size=\"12\">false positive rate</text>\n"
      "<text x=\"-30\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 -30 200)\">true positive rate</text>\n";
  char buf[128];
  for (std::size_t c = 0; c < curves.size(); ++c) {
    s += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(colors[c % 4]) + "\" points=\"";
    for (auto [x, y] : curves[c].second.points) {
      std::snprintf(buf, sizeof buf, "%.4f,%.4f ", 360.0 * x, 360.0 * (1.0 - y));
      s += buf;
    }
    s += "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"200\" y=\"%zu\" font-size=\"12\" fill=\"%s\">%s AUC %.3f</text>\n", 300 + 16 * c,
                  colors[c % 4], curves[c].first.c_str(), curves[c].second.auc);
    s += buf;
  }
  return s + "</svg>\n";
}

// Class activation map on the gamma = 0 slice: values[alpha * 2b + beta].
struct CamMap {
  int class_index = 0;
  int bandwidth = 0;
  std::vector<double> values;

  int size() const { return 2 * bandwidth; }
  double at(int alpha, int beta) const { return values[static_cast<std::size_t>(alpha * size() + beta)]; }

  SphereSignal to_signal() const {
    SphereSignal s(1, bandwidth);
    for (int a = 0; a < size(); ++a)
      for (int j = 0; j < size(); ++j) s.at(0, j, a) = at(a, j);
    return s;
  }
};

struct CamPair {
  CamMap left, right;
};

// Post-ReLU last trunk maps, gamma = 0 slice, times the wGAP beta weight,
// summed over channels with the FC weights of `class_index` for that
// hemisphere's feature block.
template <class T>
CamPair compute_cam(Model<T>& m, const Example& subject, int class_index) {
  if (m.arch.kind != ModelKind::spherical) throw std::invalid_argument("compute_cam: model is not spherical");
  if (class_index < 0 || class_index >= m.arch.classes) throw std::invalid_argument("compute_cam: class index out of range");
  Tape<T> tape;
  auto fo = forward(tape, m, {&subject}, ForwardOptions{});
  const auto& F = tape.value(fo.trunk);
  const int b = m.arch.layers.back().bandwidth, N = 2 * b, C = m.arch.trunk_channels();
  const auto w = wgap_weights(b);
  const auto& W = m.get("fc.weight").values;
  const std::size_t row = static_cast<std::size_t>(class_index) * static_cast<std::size_t>(2 * C);
  CamPair out;
  for (int h = 0; h < 2; ++h) {
    CamMap& cam = h == 0 ? out.left : out.right;
    cam.class_index = class_index;
    cam.bandwidth = b;
    cam.values.assign(static_cast<std::size_t>(N * N), 0.0);
    for (int c = 0; c < C; ++c) {
      const double wc = W[row + static_cast<std::size_t>(h * C + c)];
      const T* map = F.data() + static_cast<std::size_t>(h * C + c) * static_cast<std::size_t>(N * N * N);
      for (int a = 0; a < N; ++a)
        for (int j = 0; j < N; ++j) cam.values[static_cast<std::size_t>(a * N + j)] += wc * w[static_cast<std::size_t>(j)] * map[(a * N + j) * N];
    }
  }
  return out;
}

template <class T>
CamPair population_average_cam(Model<T>& m, const std::vector<const Example*>& subjects, int class_index) {
  if (subjects.empty()) throw std::invalid_argument("population_average_cam: empty subset");
  CamPair avg;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    CamPair c = compute_cam(m, *subjects[i], class_index);
    if (i == 0) {
      avg = c;
      continue;
    }
    for (std::size_t e = 0; e < c.left.values.size(); ++e) {
      avg.left.values[e] += c.left.values[e];
      avg.right.values[e] += c.right.values[e];
    }
  }
  for (std::size_t e = 0; e < avg.left.values.size(); ++e) {
    avg.left.values[e] /= static_cast<double>(subjects.size());
    avg.right.values[e] /= static_cast<double>(subjects.size());
  }
  return avg;
}

struct CamPeak {
  Hemisphere hemisphere = Hemisphere::left;
  int alpha = 0, beta = 0;
  Vec3 point{};
};

// Joint argmax over both hemispheres (left first on ties).
inline CamPeak cam_argmax(const CamPair& cams) {
  CamPeak best;
  double v = -1e300;
  for (int h = 0; h < 2; ++h) {
    const CamMap& c = h == 0 ? cams.left : cams.right;
    auto grid = make_grid(c.bandwidth);
    for (int a = 0; a < c.size(); ++a)
      for (int j = 0; j < c.size(); ++j)
        if (c.at(a, j) > v) {
          v = c.at(a, j);
          best = {h == 0 ? Hemisphere::left : Hemisphere::right, a, j, grid.point(j, a)};
        }
  }
  return best;
}

// Binary PPM, diverging blue-white-red scale symmetric about zero, each grid
// cell drawn as a `scale` x `scale` block; rows are beta, columns alpha.
inline std::string cam_ppm(const CamMap& c, int scale = 16) {
  double mx = 0.0;
  for (double v : c.values) mx = std::max(mx, std::abs(v));
  const int N = c.size(), W = N * scale;
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(W) + "\n255\n";
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      const double t = mx > 0.0 ? c.at(x / scale, y / scale) / mx : 0.0;
      unsigned char r, g, b;
      if (t >= 0) {
        r = 255;
        g = b = static_cast<unsigned char>(std::lround(255 * (1.0 - t)));
      } else {
        b = 255;
        r = g = static_cast<unsigned char>(std::lround(255 * (1.0 + t)));
      }
      out += static_cast<char>(r);
      out += static_cast<char>(g);
      out += static_cast<char>(b);
    }
  return out;
}

}  // namespace scnn
