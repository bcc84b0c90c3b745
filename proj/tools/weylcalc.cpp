// Command-line front end: script runner, REPL, and the built-in property
// suite. Exit code 0 iff nothing errored and every check passed.

#include "weylcalc/weylcalc.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

int usage() {
    std::cerr << "usage:\n"
              << "  weylcalc run <script> [--format text|json] [--out <file>]\n"
              << "  weylcalc repl\n"
              << "  weylcalc selftest\n";
    return 2;
}

int cmd_run(int argc, char **argv) {
    std::string path, format = "text", outfile;
    for (int i = 0; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--format" && i + 1 < argc) {
            format = argv[++i];
        } else if (a == "--out" && i + 1 < argc) {
            outfile = argv[++i];
        } else if (path.empty()) {
            path = a;
        } else {
            return usage();
        }
    }
    if (path.empty() || (format != "text" && format != "json")) return usage();
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    weylcalc::Report rep;
    try {
        weylcalc::script::Parser parser(buf.str());
        weylcalc::script::Script sc = parser.parse_script();
        weylcalc::Engine engine;
        rep = engine.run(sc);
    } catch (const weylcalc::SyntaxError &e) {
        weylcalc::ReportEntry entry;
        entry.stmt = "(parse)";
        entry.ok = false;
        entry.error = e.what();
        rep.entries.push_back(entry);
    }
    std::string body = format == "json" ? weylcalc::emit_json(rep) : weylcalc::emit_text(rep);
    if (outfile.empty()) {
        std::cout << body;
    } else {
        std::ofstream out(outfile, std::ios::binary);
        out << body;
    }
    return rep.all_ok() ? 0 : 1;
}

int cmd_repl() {
    weylcalc::Engine engine;
    std::string pending;
    std::string line;
    bool ok = true;
    std::cout << "weylcalc repl -- statements end with ';', ctrl-d quits\n";
    while (std::getline(std::cin, line)) {
        pending += line + "\n";
        if (pending.find(';') == std::string::npos) continue;
        try {
            weylcalc::script::Parser parser(pending);
            weylcalc::script::Script sc = parser.parse_script();
            for (auto &st : sc.statements) {
                weylcalc::ReportEntry e = engine.eval_statement(st);
                weylcalc::Report one;
                one.entries.push_back(e);
                std::cout << weylcalc::emit_text(one);
                if (!e.ok) ok = false;
                for (auto &[n, p] : e.checks)
                    if (!p) ok = false;
            }
            pending.clear();
        } catch (const weylcalc::SyntaxError &e) {
            // keep accumulating if the statement is simply unfinished
            if (std::string(e.what()).find("expected ';'") != std::string::npos) continue;
            std::cout << "ERROR: " << e.what() << "\n";
            pending.clear();
            ok = false;
        }
    }
    return ok ? 0 : 1;
}

int cmd_selftest() {
    auto lines = weylcalc::selfcheck::run_all();
    bool ok = true;
    for (auto &l : lines) {
        std::cout << (l.pass ? "[PASS] " : "[FAIL] ") << l.name;
        if (!l.detail.empty()) std::cout << " (" << l.detail << ")";
        std::cout << "\n";
        if (!l.pass) ok = false;
    }
    std::cout << (ok ? "selftest: all checks passed\n" : "selftest: FAILURES\n");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    if (argc < 2) return usage();
    std::string cmd = argv[1];
    try {
        if (cmd == "run") return cmd_run(argc - 2, argv + 2);
        if (cmd == "repl") return cmd_repl();
        if (cmd == "selftest") return cmd_selftest();
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return usage();
}
