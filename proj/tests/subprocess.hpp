#pragma once

// Small helpers for tests that drive the command-line binary: run a shell
// command and collect its exit status, and slurp output files for
// byte-for-byte comparison.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <sys/wait.h>

namespace subprocess {

// Runs `cmd` through the shell and returns the child's exit code, or -1 if
// it did not exit normally.
inline int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace subprocess
