#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slimmatch/bench.hpp"
#include "slimmatch/model.hpp"
#include "slimmatch/synthetic.hpp"
#include "slimmatch/train.hpp"

namespace slimmatch {

// Process exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

// Seed of pair `index` in a dataset generated from `base`.
std::uint64_t pair_seed(std::uint64_t base, std::size_t index);

struct SynthOptions {
  std::size_t count = 10;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  HomographyLimits limits;
  std::filesystem::path out_dir;
};

struct TrainOptions {
  std::filesystem::path data_dir;
  ModelConfig model = ModelConfig::tiny();
  TrainConfig train;
  std::filesystem::path out_model;
};

struct MatchOptions {
  std::filesystem::path model;
  std::filesystem::path image_a;
  std::filesystem::path image_b;
  std::filesystem::path out_tsv;
  std::optional<std::filesystem::path> out_svg;
};

struct EvalOptions {
  std::filesystem::path matches_dir;
  std::filesystem::path gt_dir;
  std::string metric = "mma";  // mma, ccm, auc
};

struct BenchOptions {
  std::vector<std::size_t> ns{256, 512, 1024};
  std::size_t channels = 64;
  std::vector<AttentionKind> kinds{AttentionKind::vector, AttentionKind::vanilla};
  std::size_t repeats = 20;
  std::optional<std::filesystem::path> out_csv;
};

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_match(const MatchOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err);

// Rotation (row-major) and translation of a camera pose, 12 numbers.
struct PoseRecord {
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
};
PoseRecord read_pose(const std::filesystem::path& path);
void write_pose(const std::filesystem::path& path, const PoseRecord& pose);

}  // namespace slimmatch
