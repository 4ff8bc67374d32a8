#include "synthpar/hooks.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "synthpar/errors.hpp"

namespace synthpar {

namespace {

class TempFile {
 public:
  TempFile() {
    auto pattern = (std::filesystem::temp_directory_path() / "synthpar_hook_XXXXXX").string();
    const int fd = mkstemp(pattern.data());
    if (fd < 0) throw IntegrationError("cannot create temporary file for hook input");
    close(fd);
    path_ = pattern;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string protocol_field(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string expand_command(const std::string& command_template,
                           const std::map<std::string, std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < command_template.size();) {
    if (command_template[i] == '{') {
      const auto close = command_template.find('}', i);
      if (close != std::string::npos) {
        const auto key = command_template.substr(i + 1, close - i - 1);
        if (const auto it = values.find(key); it != values.end()) {
          out += shell_quote(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out += command_template[i++];
  }
  return out;
}

HookResult run_line_hook(const std::string& command, std::span<const std::string> input_lines) {
  TempFile input;
  {
    std::ofstream out(input.path(), std::ios::trunc);
    for (const auto& line : input_lines) out << line << '\n';
    if (!out) throw IntegrationError("cannot write hook input");
  }
  const std::string full = "(" + command + ") < " + shell_quote(input.path());
  FILE* pipe = popen(full.c_str(), "r");
  if (pipe == nullptr) throw IntegrationError("cannot start hook: " + command);

  std::string output;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = pclose(pipe);

  HookResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
  std::size_t start = 0;
  while (start < output.size()) {
    auto end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    std::string line = output.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    result.lines.push_back(std::move(line));
    start = end + 1;
  }
  return result;
}

}  // namespace synthpar
