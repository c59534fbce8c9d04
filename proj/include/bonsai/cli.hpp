#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bonsai/parallel.hpp"

namespace bonsai::cli {

struct BankOptions {
    std::filesystem::path manifest;
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::filesystem::path> backend_script;
    Exec exec = Exec::parallel;
};

struct ScoreOptions {
    std::string hypothesis;
    std::optional<std::filesystem::path> bank;
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    /// ORIGINAL DESCRIPTION to anchor on. Without it the summary is generated
    /// from the bank's observations.
    std::optional<std::string> context;
    std::optional<std::filesystem::path> backend_script;
    Exec exec = Exec::parallel;
};

struct McqOptions {
    std::filesystem::path input;
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> backend_script;
    Exec exec = Exec::parallel;
};

struct ServeOptions {
    std::string addr = "127.0.0.1:8080";
    std::filesystem::path state;
    std::optional<std::filesystem::path> ui;
    std::optional<std::filesystem::path> backend_script;
};

// Each command returns a process exit code: 0 on success, 1 on failure with a
// one-line message on `err`.

/// Builds an evidence bank; prints the factor count and per-source coverage.
int cmd_bank(const BankOptions& opts, std::ostream& out, std::ostream& err);
/// Decomposes and scores one hypothesis; prints the root probability ("0.7200").
int cmd_score(const ScoreOptions& opts, std::ostream& out, std::ostream& err);
/// Runs a multiple-choice episode (plus rescaling when enabled); prints the
/// one-based chosen option.
int cmd_mcq(const McqOptions& opts, std::ostream& out, std::ostream& err);
/// Serves run documents from the state directory until interrupted.
int cmd_serve(const ServeOptions& opts, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches to a command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bonsai::cli
