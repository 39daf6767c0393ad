#include "slimmatch/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "slimmatch/errors.hpp"
#include "slimmatch/match_io.hpp"
#include "slimmatch/metrics.hpp"
#include "slimmatch/parallel.hpp"
#include "slimmatch/rng.hpp"

namespace slimmatch {

namespace fs = std::filesystem;

namespace {

// Maps library exceptions onto exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string threshold_str(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

// Prediction files `<pair><suffix>` in `dir`, sorted by pair name.
std::vector<std::string> pair_files(const fs::path& dir, const std::string& suffix) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError("no such directory " + dir.string());
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (entry.is_regular_file() && file.size() > suffix.size() &&
        file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0) {
      names.insert(file.substr(0, file.size() - suffix.size()));
    }
  }
  return {names.begin(), names.end()};
}

void require_gt(const fs::path& path, const std::string& pair) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw InputError("missing ground truth for " + pair + ": " + path.string());
}

}  // namespace

std::uint64_t pair_seed(std::uint64_t base, std::size_t index) {
  return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    opt.limits.validate();
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec || !fs::is_directory(opt.out_dir, ec)) {
      throw InputError("cannot create output directory " + opt.out_dir.string());
    }
    std::vector<std::size_t> gt_counts(opt.count);
    parallel_for(opt.count, [&](std::size_t i) {
      const PlanarScene scene = make_pair(opt.height, opt.width, pair_seed(opt.seed, i), opt.limits);
      write_pair(opt.out_dir, i, scene);
      gt_counts[i] = scene.labels.coarse.size();
    });
    for (std::size_t i = 0; i < opt.count; ++i) {
      out << pair_name(i) << "\tseed=" << pair_seed(opt.seed, i) << "\tgt_matches=" << gt_counts[i]
          << '\n';
    }
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto records = read_dataset(opt.data_dir);
    if (records.empty()) throw InputError("no pair_* directories in " + opt.data_dir.string());
    std::vector<TrainPair> pairs;
    for (const auto& r : records) pairs.push_back({r.image_a, r.image_b, r.h});

    Model model = Model::init(opt.model);
    out << "pairs\t" << pairs.size() << "\tparams\t" << model.parameters().numel() << '\n';
    out << "initial_loss\t" << fixed(evaluate_loss(model, pairs), 6) << '\n';
    TrainConfig tc = opt.train;
    tc.on_epoch = [&](const EpochStats& s) {
      out << "epoch\t" << s.epoch << "\tloss\t" << fixed(s.mean_loss, 6) << "\tskipped\t" << s.skipped
          << '\n'
          << std::flush;
    };
    const TrainResult result = train(model, pairs, tc);
    save_model(opt.out_model, model);
    if (result.diverged) {
      err << "error: loss diverged after epoch " << result.history.size()
          << "; saved the last finite parameters to " << opt.out_model.string() << '\n';
      return kExitNumeric;
    }
    out << "final_loss\t" << fixed(evaluate_loss(model, pairs), 6) << '\n';
    return kExitOk;
  });
}

int cmd_match(const MatchOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Model model = load_model(opt.model);
    const Image a = read_pgm(opt.image_a);
    const Image b = read_pgm(opt.image_b);
    const Prediction pred = predict(model, a, b);
    write_matches_tsv(opt.out_tsv, pred.fine.matches);
    if (opt.out_svg) write_matches_svg(*opt.out_svg, a, b, pred.fine.matches);
    out << "coarse\t" << pred.coarse.size() << "\tfine\t" << pred.fine.size() << '\n';
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.metric == "mma" || opt.metric == "ccm") {
      const auto names = pair_files(opt.matches_dir, ".tsv");
      std::vector<PointPairs> matches;
      std::vector<Homography> gts;
      std::vector<CcmPair> ccm_pairs;
      for (const auto& name : names) {
        const fs::path gt_dir = opt.gt_dir / name;
        require_gt(gt_dir / "h.txt", name);
        const Homography h = read_homography(gt_dir / "h.txt");
        PointPairs pp;
        for (const auto& m : read_matches_tsv(opt.matches_dir / (name + ".tsv"))) pp.push_back({m.a, m.b});
        if (opt.metric == "mma") {
          matches.push_back(std::move(pp));
          gts.push_back(h);
          continue;
        }
        require_gt(gt_dir / "a.pgm", name);
        const Image a = read_pgm(gt_dir / "a.pgm");
        const fs::path explicit_h = opt.matches_dir / (name + ".h.txt");
        std::optional<Homography> pred;
        std::error_code ec;
        if (fs::exists(explicit_h, ec)) {
          pred = read_homography(explicit_h);
        } else {
          try {
            pred = homography_dlt(pp);
          } catch (const GeometryError&) {
            // Too few or degenerate matches: the pair counts as a failure.
          }
        }
        ccm_pairs.push_back({h, pred, a.height, a.width});
      }
      if (opt.metric == "mma") {
        const MmaResult r = mma(matches, gts, kMmaThresholds);
        for (std::size_t k = 0; k < r.values.size(); ++k) {
          out << "mma\t" << threshold_str(kMmaThresholds[k]) << '\t' << fixed(r.values[k], 6) << '\n';
        }
      } else {
        const auto v = ccm(ccm_pairs, kCcmThresholds);
        for (std::size_t k = 0; k < v.size(); ++k) {
          out << "ccm\t" << threshold_str(kCcmThresholds[k]) << '\t' << fixed(v[k], 6) << '\n';
        }
      }
      return kExitOk;
    }
    if (opt.metric == "auc") {
      std::vector<double> errors;
      for (const auto& name : pair_files(opt.matches_dir, ".pose.txt")) {
        const fs::path gt = opt.gt_dir / name / "pose.txt";
        require_gt(gt, name);
        const PoseRecord ref = read_pose(gt);
        const PoseRecord est = read_pose(opt.matches_dir / (name + ".pose.txt"));
        errors.push_back(pose_error(ref.r, ref.t, est.r, est.t).max_deg());
      }
      const auto v = auc_at_thresholds(errors, kAucThresholds);
      for (std::size_t k = 0; k < v.size(); ++k) {
        out << "auc\t" << threshold_str(kAucThresholds[k]) << '\t' << fixed(v[k], 6) << '\n';
      }
      return kExitOk;
    }
    throw InputError("unknown metric '" + opt.metric + "' (mma, ccm, auc)");
  });
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto rows = bench_attention_scaling(opt.ns, opt.channels, opt.kinds, opt.repeats);
    const std::string csv = format_bench_csv(rows);
    out << csv;
    if (opt.out_csv) {
      std::ofstream f(*opt.out_csv);
      if (!(f << csv)) throw InputError("cannot write " + opt.out_csv->string());
    }
    const auto problems = check_scaling(rows);
    for (const auto& p : problems) err << "scaling check failed: " << p << '\n';
    return problems.empty() ? kExitOk : kExitNumeric;
  });
}

PoseRecord read_pose(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  if (!in.eof() || v.size() != 12) throw InputError(path.string() + ": expected 12 numbers");
  PoseRecord p;
  p.r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  p.t << v[9], v[10], v[11];
  return p;
}

void write_pose(const fs::path& path, const PoseRecord& pose) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  char buf[40];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", pose.r(r, c));
      out << buf << (c == 2 ? '\n' : ' ');
    }
  }
  for (int k = 0; k < 3; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", pose.t(k));
    out << buf << (k == 2 ? '\n' : ' ');
  }
}

}  // namespace slimmatch
