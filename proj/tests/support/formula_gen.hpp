#pragma once

// Random formula text for property tests. Writes text directly so the parser
// is exercised independently of the library's printers.

#include <random>
#include <string>

namespace cellscope::testing {

class FormulaGen {
public:
    explicit FormulaGen(std::uint64_t seed) : rng_(seed) {}

    std::string formula(int depth = 4) { return expr(depth); }

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

private:
    std::mt19937_64 rng_;

    std::string cell() {
        std::string s;
        if (pick(4) == 0) s += "Sheet2!";
        if (pick(3) == 0) s += '$';
        s += static_cast<char>('A' + pick(6));
        if (pick(3) == 0) s += '$';
        s += std::to_string(1 + pick(30));
        return s;
    }

    std::string leaf() {
        switch (pick(9)) {
            case 0: return std::to_string(pick(1000));
            case 1: return std::to_string(pick(100)) + "." + std::to_string(pick(100));
            case 2: return "\"t" + std::string(pick(2) ? "\"\"q" : "") + std::to_string(pick(9)) + "\"";
            case 3: return pick(2) ? "TRUE" : "false";
            case 4: return pick(2) ? "#N/A" : "#DIV/0!";
            case 5: {
                const char c = static_cast<char>('A' + pick(4));
                const int r = 1 + pick(10);
                return std::string(1, c) + std::to_string(r) + ":" + std::string(1, c + 1) + std::to_string(r + pick(5));
            }
            case 6: return pick(2) ? "Rate" : "Total_Sales";
            default: return cell();
        }
    }

    std::string expr(int depth) {
        if (depth <= 0) return leaf();
        static const char* binops[] = {"+", "-", "*", "/", "^", "&", "=", "<>", "<", ">", "<=", ">="};
        static const char* funcs[] = {"SUM", "IF", "AVERAGE", "max", "ROUND", "VLOOKUP", "NOW"};
        switch (pick(6)) {
            case 0: return leaf();
            case 1: return expr(depth - 1) + binops[pick(12)] + expr(depth - 1);
            case 2: return "-" + expr(depth - 1);
            case 3: return "(" + expr(depth - 1) + ")";
            case 4: return expr(depth - 1) + "%";
            default: {
                const char* f = funcs[pick(7)];
                std::string s = std::string(f) + "(";
                const int n = std::string(f) == "NOW" ? 0 : 1 + pick(3);
                for (int i = 0; i < n; ++i) {
                    if (i) s += pick(2) ? "," : ", ";
                    s += expr(depth - 1);
                }
                return s + ")";
            }
        }
    }
};

}  // namespace cellscope::testing
