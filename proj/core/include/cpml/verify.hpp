#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace cpml::verify {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::string detail;
};

// Built-in self checks on randomized instances:
//   decode-vs-direct   decoded gradient equals sum_k Xbar_k^T gbar(Xbar_k, Wbar) for random responder subsets
//   threshold          threshold - 1 results are refused, threshold results decode
//   mds                every T x T bottom submatrix of U is invertible
//   shamir             Shamir round trip and Vandermonde privacy check
//   cross-scheme       the MPC baseline and the coded decode agree
//   wire               frames and share files survive a round trip
std::vector<SuiteResult> run_all(std::uint64_t seed, std::size_t instances);

struct OpCountRow {
  std::size_t K = 0;
  std::size_t N = 0;
  std::size_t threshold = 0;
  double worker_muls = 0.0;     // mean over the workers that answered
  double mpc_party_muls = 0.0;  // mean over the parties
};

// Per-worker and per-party field multiplications for one gradient round at
// each K, measured by the workers themselves.
std::vector<OpCountRow> operation_counts(std::span<const std::size_t> Ks, std::size_t m, std::size_t d, int r,
                                         std::size_t T, std::size_t N, std::uint64_t seed);

void print_op_table(std::ostream& out, std::span<const OpCountRow> rows);

}  // namespace cpml::verify
