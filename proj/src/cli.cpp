#include "bonsai/cli.hpp"

#include <cstdio>
#include <map>

#include "CLI11.hpp"

#include "bonsai/counterfactual.hpp"
#include "bonsai/decomposer.hpp"
#include "bonsai/error.hpp"
#include "bonsai/evidence.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/run_document.hpp"
#include "bonsai/scorer.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/serve.hpp"
#include "bonsai/text.hpp"

namespace bonsai::cli {

namespace {

struct Loaded {
    RunConfig config;
    Backends backends;
    prompts::Templates templates;
};

Loaded load(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& script) {
    Loaded l;
    l.config = load_config(config_path);
    l.backends = BackendRegistry::from_config(l.config, script).resolve(l.config);
    l.templates = prompts::Templates::from(l.config.prompt_dir);
    return l;
}

/// Runs `body`, mapping any failure to exit code 1 with a message.
template <class Fn>
int guarded(std::ostream& err, Fn&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "bonsai: error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "bonsai: error: " << e.what() << "\n";
    }
    return 1;
}

std::string fixed4(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p);
    return buf;
}

}  // namespace

int cmd_bank(const BankOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto manifest = load_manifest(opts.manifest);
        if (manifest.sources.empty()) throw Error(ErrorKind::precondition, "manifest " + opts.manifest.string() + " has no sources");
        const auto l = load(opts.config, opts.backend_script);
        const bool leaf_level = l.config.evidence_level == EvidenceLevel::leaf;
        const auto built = build_bank(manifest, manifest.question.value_or(""),
                                      leaf_level ? ExtractionStage::test_time : ExtractionStage::offline, l.config,
                                      l.backends, l.templates, opts.exec);
        write_file(opts.out, serialize_bank(built.bank));
        for (const auto& w : built.warnings) err << "bonsai: warning: " << w << "\n";

        out << "factors: " << built.bank.factors.size() << "\n";
        for (const auto& src : built.bank.sources) {
            std::size_t count = 0;
            double lo = 0.0, hi = 0.0;
            for (const auto& f : built.bank.factors) {
                if (f.span.source_id != src.id) continue;
                lo = count ? std::min(lo, f.span.start) : f.span.start;
                hi = count ? std::max(hi, f.span.end) : f.span.end;
                ++count;
            }
            out << "  " << src.id << " (" << to_string(src.modality) << "): " << count << " factors";
            if (count && src.modality != SourceModality::image)
                out << ", covering " << text::format_fixed(lo, 1) << "-" << text::format_fixed(hi, 1) << " of "
                    << text::format_fixed(src.length, 1);
            out << "\n";
        }
        return 0;
    });
}

int cmd_score(const ScoreOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        require(!text::trim(opts.hypothesis).empty(), "hypothesis is empty");
        const auto l = load(opts.config, opts.backend_script);
        TreeRun run;
        run.config = l.config;
        run.hypothesis = text::trim(opts.hypothesis);
        if (opts.bank) run.bank = deserialize_bank(read_file(*opts.bank));

        std::vector<std::string> observations;
        for (const auto& f : run.bank.factors) observations.push_back(f.text);
        if (!opts.context && observations.empty())
            throw Error(ErrorKind::precondition, "give --context or a non-empty --bank to anchor the score");
        try {
            run.summary = make_anchor_summary(observations, opts.context, *l.backends.chat, l.templates,
                                              l.config.max_tokens);
        } catch (const Error& e) {
            throw e.with_context("summary");
        }

        run.tree = build_tree(Claim{run.hypothesis, false}, l.config, l.backends, l.templates, opts.exec);
        const std::string no_counterfactual;
        const InferenceContext ctx{run.bank, run.summary, no_counterfactual, run.config, l.backends, l.templates};
        run.root_prob = infer(run.tree, ctx, {}, opts.exec);
        if (opts.out) write_file(*opts.out, serialize_run(run));
        out << fixed4(run.root_prob) << "\n";
        return 0;
    });
}

int cmd_mcq(const McqOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto input = load_mcq_input(opts.input);
        const auto l = load(opts.config, opts.backend_script);
        auto run = answer_mcq(input, l.config, l.backends, l.templates, opts.exec);
        if (l.config.rescale) {
            if (input.sources)
                rescale_evidence(run, *input.sources, l.backends, l.templates, opts.exec);
            else
                run.warnings.push_back("rescale is enabled but the input names no sources; skipped");
        }
        if (opts.out) write_file(*opts.out, serialize_run(run));
        out << run.chosen + 1 << "\n";
        return 0;
    });
}

int cmd_serve(const ServeOptions& opts, std::ostream&, std::ostream& err) {
    return guarded(err, [&] {
        const auto colon = opts.addr.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorKind::precondition, "--addr must be host:port");
        const std::string host = opts.addr.substr(0, colon);
        int port = 0;
        try {
            port = std::stoi(opts.addr.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorKind::precondition, "bad port in --addr " + opts.addr);
        }
        Service service(opts.state, config_backend_factory(opts.backend_script));
        run_http_server(service, host, port, opts.ui);
        return 0;
    });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grounded, compositional hypothesis scoring over reasoning trees", "bonsai"};
    app.require_subcommand(1);
    int threads = 0;
    bool serial = false;
    std::string backend_script;
    app.add_option("--threads", threads, "OpenMP worker threads (default: runtime choice)")->check(CLI::NonNegativeNumber);
    app.add_flag("--serial", serial, "Use the serial reference kernels");
    app.add_option("--backend-script", backend_script, "Mock script replacing the 'mock' backend's script");

    BankOptions bank;
    auto* bank_cmd = app.add_subcommand("bank", "Extract an evidence bank from a source manifest");
    bank_cmd->add_option("--manifest", bank.manifest, "Source manifest (JSON)")->required();
    bank_cmd->add_option("--config", bank.config, "Run configuration (JSON)")->required();
    bank_cmd->add_option("--out", bank.out, "Bank file to write (JSONL)")->required();

    ScoreOptions score;
    std::string score_bank, score_out, score_context;
    auto* score_cmd = app.add_subcommand("score", "Decompose and score one hypothesis");
    score_cmd->add_option("--hypothesis", score.hypothesis, "Hypothesis statement")->required();
    score_cmd->add_option("--bank", score_bank, "Evidence bank (JSONL)");
    score_cmd->add_option("--config", score.config, "Run configuration (JSON)")->required();
    score_cmd->add_option("--out", score_out, "Run document to write");
    score_cmd->add_option("--context", score_context, "Anchor description used instead of a generated summary");

    McqOptions mcq;
    std::string mcq_out;
    auto* mcq_cmd = app.add_subcommand("mcq", "Answer a multiple-choice question");
    mcq_cmd->add_option("--input", mcq.input, "MCQ file (JSON)")->required();
    mcq_cmd->add_option("--config", mcq.config, "Run configuration (JSON)")->required();
    mcq_cmd->add_option("--out", mcq_out, "Run document to write");

    ServeOptions serve;
    std::string ui;
    auto* serve_cmd = app.add_subcommand("serve", "Serve run documents for inspection and correction");
    serve_cmd->add_option("--addr", serve.addr, "host:port to listen on")->capture_default_str();
    serve_cmd->add_option("--state", serve.state, "Directory of run documents")->required();
    serve_cmd->add_option("--ui", ui, "Static UI bundle served under /ui/");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    if (threads > 0) set_threads(threads);
    const Exec exec = serial ? Exec::serial : Exec::parallel;
    std::optional<std::filesystem::path> script;
    if (!backend_script.empty()) script = backend_script;

    if (*bank_cmd) {
        bank.backend_script = script;
        bank.exec = exec;
        return cmd_bank(bank, out, err);
    }
    if (*score_cmd) {
        if (!score_bank.empty()) score.bank = score_bank;
        if (!score_out.empty()) score.out = score_out;
        if (!score_context.empty()) score.context = score_context;
        score.backend_script = script;
        score.exec = exec;
        return cmd_score(score, out, err);
    }
    if (*mcq_cmd) {
        if (!mcq_out.empty()) mcq.out = mcq_out;
        mcq.backend_script = script;
        mcq.exec = exec;
        return cmd_mcq(mcq, out, err);
    }
    if (!ui.empty()) serve.ui = ui;
    serve.backend_script = script;
    return cmd_serve(serve, out, err);
}

}  // namespace bonsai::cli
