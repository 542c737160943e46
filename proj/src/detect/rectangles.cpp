#include "detect/detect.hpp"

namespace cellscope::detect {

namespace {

using Cell = std::pair<int, int>;

struct Rect {
    int r1, c1, r2, c2;
    std::set<int> gap_rows;  // bridged rows
    std::set<int> gap_cols;  // bridged columns
    long area(int k) const { return static_cast<long>((r2 - r1) / k + 1) * ((c2 - c1) / k + 1); }
};

class Grower {
public:
    Grower(const std::set<Cell>& cells, const std::set<Cell>& covered, const RectangleOptions& o)
        : cells_(cells), covered_(covered), o_(o), k_(std::max(1, o.stride)) {}

    Rect right_then_down(int r, int c) const {
        Rect x{r, c, r, c, {}, {}};
        grow_right(x);
        grow_down(x);
        return x;
    }

    Rect down_then_right(int r, int c) const {
        Rect x{r, c, r, c, {}, {}};
        grow_down(x);
        grow_right(x);
        return x;
    }

    int stride() const { return k_; }

private:
    const std::set<Cell>& cells_;
    const std::set<Cell>& covered_;
    const RectangleOptions& o_;
    int k_;

    bool avail(int r, int c) const { return cells_.count({r, c}) && !covered_.count({r, c}); }
    bool absent(int r, int c) const {
        return !cells_.count({r, c}) && !(o_.blocked && o_.blocked->count({r, c}));
    }

    // A new column is usable when every lattice row of the span is available,
    // except bridged rows, which must stay absent.
    bool col_ok(const Rect& x, int c) const {
        for (int r = x.r1; r <= x.r2; r += k_)
            if (x.gap_rows.count(r) ? !absent(r, c) : !avail(r, c)) return false;
        return true;
    }
    bool col_absent(const Rect& x, int c) const {
        for (int r = x.r1; r <= x.r2; r += k_)
            if (!absent(r, c)) return false;
        return true;
    }
    bool row_ok(const Rect& x, int r) const {
        for (int c = x.c1; c <= x.c2; c += k_)
            if (x.gap_cols.count(c) ? !absent(r, c) : !avail(r, c)) return false;
        return true;
    }
    bool row_absent(const Rect& x, int r) const {
        for (int c = x.c1; c <= x.c2; c += k_)
            if (!absent(r, c)) return false;
        return true;
    }

    void grow_right(Rect& x) const {
        for (;;) {
            if (col_ok(x, x.c2 + k_)) {
                x.c2 += k_;
                continue;
            }
            bool extended = false;
            for (int g = 1; g <= o_.max_gap && !extended; ++g) {
                if (!col_absent(x, x.c2 + g * k_)) break;
                if (col_ok(x, x.c2 + (g + 1) * k_)) {
                    for (int j = 1; j <= g; ++j) x.gap_cols.insert(x.c2 + j * k_);
                    x.c2 += (g + 1) * k_;
                    extended = true;
                }
            }
            if (!extended) return;
        }
    }

    void grow_down(Rect& x) const {
        for (;;) {
            if (row_ok(x, x.r2 + k_)) {
                x.r2 += k_;
                continue;
            }
            bool extended = false;
            for (int g = 1; g <= o_.max_gap && !extended; ++g) {
                if (!row_absent(x, x.r2 + g * k_)) break;
                if (row_ok(x, x.r2 + (g + 1) * k_)) {
                    for (int j = 1; j <= g; ++j) x.gap_rows.insert(x.r2 + j * k_);
                    x.r2 += (g + 1) * k_;
                    extended = true;
                }
            }
            if (!extended) return;
        }
    }
};

}  // namespace

std::vector<Region> greedy_rectangles(const std::set<std::pair<int, int>>& cells, const RectangleOptions& opts) {
    std::vector<Region> out;
    std::set<Cell> covered;
    Grower grow(cells, covered, opts);
    const int k = grow.stride();
    for (const auto& [r, c] : cells) {  // row-major
        if (covered.count({r, c})) continue;
        Rect a = grow.right_then_down(r, c);
        Rect b = grow.down_then_right(r, c);
        const Rect& best = b.area(k) > a.area(k) ? b : a;
        for (int rr = best.r1; rr <= best.r2; rr += k)
            for (int cc = best.c1; cc <= best.c2; cc += k)
                if (cells.count({rr, cc})) covered.insert({rr, cc});
        out.push_back(Region{"", best.r1, best.c1, best.r2, best.c2});
    }
    return out;
}

}  // namespace cellscope::detect
