#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genpath/general_x.hpp"
#include "genpath/operators.hpp"
#include "genpath/path_core.hpp"

namespace genpath {

// One normalized flag set shared by the subcommands. `problem` decides which
// of the remaining fields are demanded; anything extraneous is rejected.
struct RunConfig {
  std::string problem;      // fl1d | flgraph | sfl | tf | custom
  int order = -1;           // tf only; -1 means "not given"
  double alpha = 0.0;       // sfl only; 0 means "not given"
  std::string y;            // observations CSV
  std::string x;            // optional design matrix CSV
  std::string edges;        // edge-list CSV (flgraph, sfl)
  std::string d;            // penalty triplet CSV (custom)
  Eigen::Index max_steps = 2000;
  double min_lambda = 0.0;
  Eigen::Index max_df = 0;  // <= 0 means p
  std::string format = "csv";
  unsigned seed = 1;        // randomized subcommands (bench generators)
};

struct ProblemData {
  Eigen::VectorXd y;
  PenaltySpec spec;
  std::optional<DesignMatrix> x;
};

// CSV loaders. Lines starting with '#' are skipped; headers are mandatory.
// Malformed content raises InputError with a "file line N" diagnostic.
Eigen::VectorXd load_vector_csv(const std::string& path);
Eigen::MatrixXd load_matrix_csv(const std::string& path);
std::vector<std::pair<Eigen::Index, Eigen::Index>> load_edges_csv(
    const std::string& path);
SparseRowMat load_triplets_csv(const std::string& path, Eigen::Index cols);

// Validates the flag/problem combination and loads every referenced file.
ProblemData assemble_problem(const RunConfig& config);

SolutionPath run_configured_path(const ProblemData& prob, const PathOptions& opt);

// Path artifact: knots.<fmt> and segments.<fmt> per `config.format`, plus
// meta.json carrying everything needed to rebuild the path object without
// re-solving. Reals are serialized as %.17g (round-trip exact).
void write_path_artifact(const std::string& dir, const RunConfig& config,
                         const ProblemData& prob, const SolutionPath& path);
SolutionPath load_path_artifact(const std::string& dir);

// Largest lambda at which the path carries the requested degrees of freedom:
// the lower end of the highest segment whose df matches (so a full-rank
// penalty driven to df = p yields beta = y at lambda = 0). Unreachable df
// raises RangeError listing the achievable values.
double lambda_for_df(const SolutionPath& path, Eigen::Index df);

void write_coef_file(const std::string& file, const std::string& format,
                     const Eigen::VectorXd& beta);

struct BenchPoint {
  Eigen::Index n = 0;      // actual problem size (grid sizes round down)
  double seconds = 0.0;    // best of `repeats` runs
};

struct BenchTable {
  std::vector<BenchPoint> points;
  double slope = 0.0;      // least-squares slope of log t against log n
};

// Deterministic benchmark inputs: a two-period sinusoid for the chain
// problems, a flat surface raised on the bottom-left third of a square grid
// for fl2d, both with seeded N(0, 0.2^2) noise.
Eigen::VectorXd bench_signal(const std::string& problem, Eigen::Index n,
                             unsigned seed);
PenaltySpec bench_penalty(const std::string& problem, int order, Eigen::Index n);

BenchTable run_bench(const std::string& problem, int order,
                     const std::vector<Eigen::Index>& sizes, Eigen::Index steps,
                     unsigned seed, int repeats);

void write_bench_file(const std::string& file, const std::string& format,
                      const BenchTable& table);

// Subcommand bodies; each returns the process exit code (0 ok, 2 bad input,
// 3 numerical abort with partial output, 4 out-of-range query).
int cmd_path(const RunConfig& config, const std::string& out_dir);
int cmd_coef(const std::string& artifact_dir, std::optional<double> lambda,
             std::optional<Eigen::Index> df, const std::string& out_file,
             const std::string& format);
int cmd_bench(const RunConfig& config, const std::vector<Eigen::Index>& sizes,
              Eigen::Index steps, int repeats, const std::string& out_file);

int run_cli(int argc, const char* const* argv);

}  // namespace genpath
