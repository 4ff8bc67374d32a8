#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace synthpar {

struct HookResult {
  int exit_code = 0;
  std::vector<std::string> lines;  // stdout split on '\n', trailing empty line removed
};

/// Runs `command` through /bin/sh with `input_lines` on stdin (one per line)
/// and collects stdout. Line-protocol hooks (external classifier, scorer,
/// token counter, trainer) all go through here.
HookResult run_line_hook(const std::string& command, std::span<const std::string> input_lines);

/// Replaces `{name}` placeholders with shell-quoted values.
std::string expand_command(const std::string& command_template,
                           const std::map<std::string, std::string>& values);

std::string shell_quote(const std::string& s);

/// Replaces tabs and newlines with spaces so a field fits one protocol line.
std::string protocol_field(const std::string& s);

}  // namespace synthpar
