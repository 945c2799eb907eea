// Acceptance suite driver: runs the 13 verification criteria at full scale
// (or --level quick) and prints one pass/fail line per criterion.
// Exit code 0 iff every requested criterion passes.

#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "driftlab/harness.hpp"

int main(int argc, char** argv) {
  driftlab::VerifyLevel level = driftlab::VerifyLevel::Full;
  std::vector<int> subset;
  std::string out_dir = "acceptance-out";

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << arg << " needs a value\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--criterion") {
      subset.push_back(std::stoi(next()));
    } else if (arg == "--level") {
      const std::string v = next();
      if (v == "quick")
        level = driftlab::VerifyLevel::Quick;
      else if (v == "full")
        level = driftlab::VerifyLevel::Full;
      else {
        std::cerr << "--level expects quick|full\n";
        return 2;
      }
    } else if (arg == "--out") {
      out_dir = next();
    } else if (arg == "--list") {
      for (int k = 1; k <= driftlab::criterion_count(); ++k)
        std::cout << k << " " << driftlab::criterion_name(k) << "\n";
      return 0;
    } else {
      std::cerr << "usage: acceptance [--level quick|full] [--criterion N]... "
                   "[--out DIR] [--list]\n";
      return 2;
    }
  }

  const auto results = driftlab::verify_suite(level, out_dir, subset);
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  return all ? 0 : 3;
}
