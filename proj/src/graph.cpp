#include "percolab/graph.hpp"
#include "percolab/rand.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <stdexcept>

namespace percolab {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string int_str(long long v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%lld", v);
    return buf;
}

// ---- lattice / torus coordinates ----

std::vector<long long> parse_coords(const std::string& key, int dim) {
    std::vector<long long> out;
    out.reserve(dim);
    std::size_t pos = 0;
    while (pos <= key.size()) {
        std::size_t comma = key.find(',', pos);
        std::string tok = key.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        out.push_back(std::strtoll(tok.c_str(), nullptr, 10));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (static_cast<int>(out.size()) != dim) fail("vertex key: wrong coordinate count");
    return out;
}

std::string coords_key(const std::vector<long long>& c) {
    std::string s;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) s += ',';
        s += int_str(c[i]);
    }
    return s;
}

// ---- free product Z^2 * Z/2 syllables ----

struct Syl {
    bool is_c = false;
    long long x = 0, y = 0;
};

std::vector<Syl> parse_z2z2(const std::string& key) {
    std::vector<Syl> out;
    if (key == "e") return out;
    std::size_t pos = 0;
    while (pos <= key.size()) {
        std::size_t semi = key.find(';', pos);
        std::string tok = key.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
        if (tok == "c") {
            out.push_back({true, 0, 0});
        } else {
            std::size_t comma = tok.find(',');
            if (comma == std::string::npos) fail("vertex key: bad syllable");
            Syl s;
            s.x = std::strtoll(tok.substr(0, comma).c_str(), nullptr, 10);
            s.y = std::strtoll(tok.substr(comma + 1).c_str(), nullptr, 10);
            out.push_back(s);
        }
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return out;
}

std::string z2z2_key(const std::vector<Syl>& syls) {
    if (syls.empty()) return "e";
    std::string s;
    for (std::size_t i = 0; i < syls.size(); ++i) {
        if (i) s += ';';
        if (syls[i].is_c)
            s += 'c';
        else {
            s += int_str(syls[i].x);
            s += ',';
            s += int_str(syls[i].y);
        }
    }
    return s;
}

void z2z2_translate(std::vector<Syl>& syls, long long dx, long long dy) {
    if (!syls.empty() && !syls.back().is_c) {
        syls.back().x += dx;
        syls.back().y += dy;
        if (syls.back().x == 0 && syls.back().y == 0) syls.pop_back();
    } else {
        syls.push_back({false, dx, dy});
    }
}

void z2z2_involution(std::vector<Syl>& syls) {
    if (!syls.empty() && syls.back().is_c)
        syls.pop_back();
    else
        syls.push_back({true, 0, 0});
}

// ---- lamplighter (A, v) state ----

struct LampState {
    std::string pos;
    std::vector<std::pair<std::string, int>> lamps; // sorted by site key, values 1..m-1
};

LampState parse_lamp(const std::string& key) {
    std::size_t at = key.find('@');
    if (at == std::string::npos) fail("vertex key: missing lamp separator");
    LampState st;
    st.pos = key.substr(0, at);
    std::size_t pos = at + 1;
    while (pos < key.size()) {
        // Lamp site keys may themselves contain commas (Z^2 base), so
        // split on the ':' first; the value is an int, so the next comma
        // after the colon ends the entry.
        std::size_t colon = key.find(':', pos);
        if (colon == std::string::npos) fail("vertex key: bad lamp entry");
        std::size_t val_end = key.find(',', colon);
        std::string site = key.substr(pos, colon - pos);
        int val = static_cast<int>(std::strtol(key.substr(colon + 1).c_str(), nullptr, 10));
        st.lamps.emplace_back(site, val);
        if (val_end == std::string::npos) break;
        pos = val_end + 1;
    }
    return st;
}

std::string lamp_key(const LampState& st) {
    std::string s = st.pos;
    s += '@';
    for (std::size_t i = 0; i < st.lamps.size(); ++i) {
        if (i) s += ',';
        s += st.lamps[i].first;
        s += ':';
        s += int_str(st.lamps[i].second);
    }
    return s;
}

int lamp_value(const LampState& st, const std::string& site) {
    for (const auto& [k, v] : st.lamps)
        if (k == site) return v;
    return 0;
}

void set_lamp(LampState& st, const std::string& site, int val) {
    for (std::size_t i = 0; i < st.lamps.size(); ++i) {
        if (st.lamps[i].first == site) {
            if (val == 0)
                st.lamps.erase(st.lamps.begin() + static_cast<long>(i));
            else
                st.lamps[i].second = val;
            return;
        }
    }
    if (val == 0) return;
    auto it = std::lower_bound(st.lamps.begin(), st.lamps.end(), site,
                               [](const auto& a, const std::string& b) { return a.first < b; });
    st.lamps.insert(it, {site, val});
}

// ---- fixed-end tree (k ups, then digit descent) ----

struct EndTreeVertex {
    int ups = 0;
    std::string digits; // chars '0'..'0'+b-2; digits[0] != '0' when ups > 0
};

EndTreeVertex parse_end_tree(const std::string& key) {
    std::size_t bar = key.find('|');
    if (bar == std::string::npos) fail("vertex key: missing height separator");
    EndTreeVertex v;
    v.ups = static_cast<int>(std::strtol(key.substr(0, bar).c_str(), nullptr, 10));
    v.digits = key.substr(bar + 1);
    return v;
}

std::string end_tree_key(const EndTreeVertex& v) {
    return int_str(v.ups) + "|" + v.digits;
}

} // namespace

// ---- GraphSpec ----

GraphSpec GraphSpec::make_lattice(int d) {
    GraphSpec s;
    s.family = Family::lattice;
    s.dim = d;
    return s;
}
GraphSpec GraphSpec::make_torus(int d, int L) {
    GraphSpec s;
    s.family = Family::torus;
    s.dim = d;
    s.side = L;
    return s;
}
GraphSpec GraphSpec::make_regular_tree(int b) {
    GraphSpec s;
    s.family = Family::regular_tree;
    s.branching = b;
    return s;
}
GraphSpec GraphSpec::make_free_group(int k) {
    GraphSpec s;
    s.family = Family::free_group;
    s.rank = k;
    return s;
}
GraphSpec GraphSpec::make_free_product_z2z2() {
    GraphSpec s;
    s.family = Family::free_product_z2z2;
    return s;
}
GraphSpec GraphSpec::make_product(GraphSpec a, GraphSpec b) {
    GraphSpec s;
    s.family = Family::product;
    s.left = std::make_shared<GraphSpec>(std::move(a));
    s.right = std::make_shared<GraphSpec>(std::move(b));
    return s;
}
GraphSpec GraphSpec::make_lamplighter(GraphSpec base, int m) {
    GraphSpec s;
    s.family = Family::lamplighter;
    s.left = std::make_shared<GraphSpec>(std::move(base));
    s.lamp_modulus = m;
    return s;
}
GraphSpec GraphSpec::make_fixed_end_tree(int b) {
    GraphSpec s;
    s.family = Family::fixed_end_tree;
    s.branching = b;
    return s;
}

void GraphSpec::validate() const {
    switch (family) {
    case Family::lattice:
        if (dim < 1 || dim > 4) fail("family.dim: lattice dimension must be in [1,4]");
        break;
    case Family::torus:
        if (dim < 1 || dim > 4) fail("family.dim: torus dimension must be in [1,4]");
        if (side < 3) fail("family.side: torus side must be >= 3");
        break;
    case Family::regular_tree:
    case Family::fixed_end_tree:
        if (branching < 3 || branching > 6) fail("family.branching: tree degree must be in [3,6]");
        break;
    case Family::free_group:
        if (rank < 1 || rank > 3) fail("family.rank: free group rank must be in [1,3]");
        break;
    case Family::free_product_z2z2:
        break;
    case Family::product: {
        if (!left || !right) fail("family.product: missing factor");
        left->validate();
        right->validate();
        auto flat = [](const GraphSpec& g) {
            return g.family == Family::lattice || g.family == Family::torus ||
                   g.family == Family::regular_tree || g.family == Family::free_group ||
                   g.family == Family::free_product_z2z2;
        };
        if (!flat(*left) || !flat(*right))
            fail("family.product: factors must be lattice/torus/tree/free_group/free_product");
        break;
    }
    case Family::lamplighter:
        if (!left) fail("family.lamplighter: missing base");
        left->validate();
        if (left->family != Family::lattice || left->dim > 2)
            fail("family.lamplighter: base must be lattice(1) or lattice(2)");
        if (lamp_modulus < 2 || lamp_modulus > 4)
            fail("family.lamp_modulus: lamp modulus must be in [2,4]");
        break;
    }
}

int GraphSpec::degree() const {
    switch (family) {
    case Family::lattice: return 2 * dim;
    case Family::torus: return 2 * dim;
    case Family::regular_tree: return branching;
    case Family::free_group: return 2 * rank;
    case Family::free_product_z2z2: return 5;
    case Family::product: return left->degree() + right->degree();
    case Family::lamplighter: return left->degree() + (lamp_modulus == 2 ? 1 : 2);
    case Family::fixed_end_tree: return branching;
    }
    return 0;
}

std::string GraphSpec::to_string() const {
    switch (family) {
    case Family::lattice: return "lattice(" + int_str(dim) + ")";
    case Family::torus: return "torus(" + int_str(dim) + "," + int_str(side) + ")";
    case Family::regular_tree: return "regular_tree(" + int_str(branching) + ")";
    case Family::free_group: return "free_group(" + int_str(rank) + ")";
    case Family::free_product_z2z2: return "free_product_z2_z2";
    case Family::product: return "product(" + left->to_string() + "," + right->to_string() + ")";
    case Family::lamplighter:
        return "lamplighter(" + left->to_string() + "," + int_str(lamp_modulus) + ")";
    case Family::fixed_end_tree: return "fixed_end_tree(" + int_str(branching) + ")";
    }
    return "?";
}

namespace {

// Recursive descent for the family grammar used in configs.
struct SpecParser {
    const std::string& s;
    std::size_t i = 0;

    explicit SpecParser(const std::string& text) : s(text) {}

    void skip_ws() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool eat(char c) {
        skip_ws();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    std::string ident() {
        skip_ws();
        std::size_t start = i;
        while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
        return s.substr(start, i - start);
    }
    int number() {
        skip_ws();
        std::size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (start == i) fail("graph.family: expected integer in spec text");
        return std::atoi(s.substr(start, i - start).c_str());
    }

    GraphSpec parse() {
        std::string name = ident();
        std::string lowered;
        for (char c : name) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lowered == "lattice") {
            expect('(');
            int d = number();
            expect(')');
            return GraphSpec::make_lattice(d);
        }
        if (lowered == "torus") {
            expect('(');
            int d = number();
            expect(',');
            int L = number();
            expect(')');
            return GraphSpec::make_torus(d, L);
        }
        if (lowered == "regular_tree") {
            expect('(');
            int b = number();
            expect(')');
            return GraphSpec::make_regular_tree(b);
        }
        if (lowered == "free_group") {
            expect('(');
            int k = number();
            expect(')');
            return GraphSpec::make_free_group(k);
        }
        if (lowered == "free_product_z2_z2" || lowered == "free_product_z2z2") {
            // Optional empty argument list: the family takes no parameters.
            if (eat('(')) expect(')');
            return GraphSpec::make_free_product_z2z2();
        }
        if (lowered == "product") {
            expect('(');
            GraphSpec a = parse();
            expect(',');
            GraphSpec b = parse();
            expect(')');
            return GraphSpec::make_product(std::move(a), std::move(b));
        }
        if (lowered == "lamplighter") {
            expect('(');
            GraphSpec base = parse();
            expect(',');
            int m = number();
            expect(')');
            return GraphSpec::make_lamplighter(std::move(base), m);
        }
        if (lowered == "fixed_end_tree") {
            expect('(');
            int b = number();
            expect(')');
            return GraphSpec::make_fixed_end_tree(b);
        }
        fail("graph.family: unknown family '" + name + "'");
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("graph.family: expected '") + c + "' in spec text");
    }
};

} // namespace

GraphSpec GraphSpec::parse(const std::string& text) {
    SpecParser p(text);
    GraphSpec spec = p.parse();
    p.skip_ws();
    if (p.i != text.size()) fail("graph.family: trailing characters in spec text");
    spec.validate();
    return spec;
}

// ---- neighbor enumeration ----

static std::string origin_key(const GraphSpec& spec) {
    switch (spec.family) {
    case Family::lattice:
    case Family::torus: {
        std::vector<long long> c(static_cast<std::size_t>(spec.dim), 0);
        return coords_key(c);
    }
    case Family::regular_tree:
    case Family::free_group:
    case Family::free_product_z2z2: return "e";
    case Family::product:
        return origin_key(*spec.left) + "#" + origin_key(*spec.right);
    case Family::lamplighter: return origin_key(*spec.left) + "@";
    case Family::fixed_end_tree: return "0|";
    }
    return "";
}

std::vector<std::pair<std::string, std::string>> neighbor_keys(const GraphSpec& spec,
                                                               const std::string& key) {
    std::vector<std::pair<std::string, std::string>> out;
    switch (spec.family) {
    case Family::lattice: {
        auto c = parse_coords(key, spec.dim);
        for (int d = 0; d < spec.dim; ++d) {
            std::string lab = "e" + int_str(d + 1);
            for (int s : {+1, -1}) {
                auto cc = c;
                cc[static_cast<std::size_t>(d)] += s;
                out.emplace_back(coords_key(cc), lab);
            }
        }
        break;
    }
    case Family::torus: {
        auto c = parse_coords(key, spec.dim);
        for (int d = 0; d < spec.dim; ++d) {
            std::string lab = "e" + int_str(d + 1);
            for (int s : {+1, -1}) {
                auto cc = c;
                auto& x = cc[static_cast<std::size_t>(d)];
                x = (x + s + spec.side) % spec.side;
                out.emplace_back(coords_key(cc), lab);
            }
        }
        break;
    }
    case Family::regular_tree: {
        for (int i = 0; i < spec.branching; ++i) {
            char g = static_cast<char>('a' + i);
            std::string w = key == "e" ? std::string() : key;
            if (!w.empty() && w.back() == g)
                w.pop_back();
            else
                w += g;
            out.emplace_back(w.empty() ? "e" : w, std::string(1, g));
        }
        break;
    }
    case Family::free_group: {
        std::string w = key == "e" ? std::string() : key;
        for (int i = 0; i < spec.rank; ++i) {
            for (char g : {static_cast<char>('a' + i), static_cast<char>('A' + i)}) {
                char inv = std::isupper(static_cast<unsigned char>(g))
                               ? static_cast<char>(std::tolower(static_cast<unsigned char>(g)))
                               : static_cast<char>(std::toupper(static_cast<unsigned char>(g)));
                std::string ww = w;
                if (!ww.empty() && ww.back() == inv)
                    ww.pop_back();
                else
                    ww += g;
                out.emplace_back(ww.empty() ? "e" : ww,
                                 std::string(1, static_cast<char>('a' + i)));
            }
        }
        break;
    }
    case Family::free_product_z2z2: {
        auto base = parse_z2z2(key);
        const std::pair<std::pair<long long, long long>, const char*> moves[4] = {
            {{+1, 0}, "a"}, {{-1, 0}, "a"}, {{0, +1}, "b"}, {{0, -1}, "b"}};
        for (const auto& [delta, lab] : moves) {
            auto syls = base;
            z2z2_translate(syls, delta.first, delta.second);
            out.emplace_back(z2z2_key(syls), lab);
        }
        {
            auto syls = base;
            z2z2_involution(syls);
            out.emplace_back(z2z2_key(syls), "c");
        }
        break;
    }
    case Family::product: {
        std::size_t hash_pos = key.find('#');
        if (hash_pos == std::string::npos) fail("vertex key: missing product separator");
        std::string lk = key.substr(0, hash_pos), rk = key.substr(hash_pos + 1);
        for (const auto& [nk, lab] : neighbor_keys(*spec.left, lk))
            out.emplace_back(nk + "#" + rk, "L:" + lab);
        for (const auto& [nk, lab] : neighbor_keys(*spec.right, rk))
            out.emplace_back(lk + "#" + nk, "R:" + lab);
        break;
    }
    case Family::lamplighter: {
        LampState st = parse_lamp(key);
        for (const auto& [nk, lab] : neighbor_keys(*spec.left, st.pos)) {
            LampState moved = st;
            moved.pos = nk;
            out.emplace_back(lamp_key(moved), "walk:" + lab);
        }
        const int m = spec.lamp_modulus;
        const int cur = lamp_value(st, st.pos);
        if (m == 2) {
            LampState toggled = st;
            set_lamp(toggled, st.pos, 1 - cur);
            out.emplace_back(lamp_key(toggled), "lamp");
        } else {
            for (int delta : {1, m - 1}) {
                LampState turned = st;
                set_lamp(turned, st.pos, (cur + delta) % m);
                out.emplace_back(lamp_key(turned), "lamp");
            }
        }
        break;
    }
    case Family::fixed_end_tree: {
        EndTreeVertex v = parse_end_tree(key);
        const int b = spec.branching;
        if (!v.digits.empty()) {
            EndTreeVertex parent = v;
            char last = parent.digits.back();
            parent.digits.pop_back();
            out.emplace_back(end_tree_key(parent), std::string("d") + last);
            for (int d = 0; d <= b - 2; ++d) {
                EndTreeVertex child = v;
                child.digits += static_cast<char>('0' + d);
                out.emplace_back(end_tree_key(child), std::string("d") + static_cast<char>('0' + d));
            }
        } else {
            EndTreeVertex parent = v;
            parent.ups += 1;
            out.emplace_back(end_tree_key(parent), "d0");
            if (v.ups > 0) {
                EndTreeVertex spine_child = v;
                spine_child.ups -= 1;
                out.emplace_back(end_tree_key(spine_child), "d0");
                for (int d = 1; d <= b - 2; ++d) {
                    EndTreeVertex child = v;
                    child.digits = std::string(1, static_cast<char>('0' + d));
                    out.emplace_back(end_tree_key(child), std::string("d") + static_cast<char>('0' + d));
                }
            } else {
                for (int d = 0; d <= b - 2; ++d) {
                    EndTreeVertex child = v;
                    child.digits = std::string(1, static_cast<char>('0' + d));
                    out.emplace_back(end_tree_key(child), std::string("d") + static_cast<char>('0' + d));
                }
            }
        }
        break;
    }
    }
    return out;
}

std::string edge_key_string(const std::string& a, const std::string& b) {
    if (a < b) return a + "\t" + b;
    return b + "\t" + a;
}

std::uint64_t edge_hash(const std::string& a, const std::string& b) {
    return fnv1a(edge_key_string(a, b));
}

// ---- size bounds ----

namespace {

std::size_t capped_mul(std::size_t a, std::size_t b, std::size_t cap) {
    if (a == 0 || b == 0) return 0;
    if (a > cap / b) return cap + 1;
    return a * b;
}

std::size_t tree_ball_count(int degree, int radius, std::size_t cap) {
    // 1 + degree * sum_{i<radius} (degree-1)^i
    std::size_t total = 1, shell = static_cast<std::size_t>(degree);
    for (int r = 1; r <= radius; ++r) {
        total += shell;
        if (total > cap) return cap + 1;
        shell = capped_mul(shell, static_cast<std::size_t>(degree - 1), cap);
        if (shell > cap) shell = cap + 1;
    }
    return total;
}

std::size_t z2z2_ball_count(int radius, std::size_t cap) {
    // Normal forms are alternating sequences of nonzero Z^2 syllables and
    // the involution letter; count by word length with a 2-state DP.
    std::vector<std::size_t> end_c(static_cast<std::size_t>(radius) + 1, 0);
    std::vector<std::size_t> end_z(static_cast<std::size_t>(radius) + 1, 0);
    std::size_t total = 1;
    for (int r = 1; r <= radius; ++r) {
        end_c[static_cast<std::size_t>(r)] = (r == 1 ? 1 : 0) + end_z[static_cast<std::size_t>(r) - 1];
        std::size_t z = 0;
        for (int s = 1; s <= r; ++s) {
            const std::size_t sphere = 4 * static_cast<std::size_t>(s); // Z^2 L1 sphere
            const std::size_t prefix = (s == r ? 1 : 0) + end_c[static_cast<std::size_t>(r - s)];
            z += capped_mul(sphere, prefix, cap);
            if (z > cap) return cap + 1;
        }
        end_z[static_cast<std::size_t>(r)] = z;
        total += end_c[static_cast<std::size_t>(r)] + z;
        if (total > cap) return cap + 1;
    }
    return total;
}

// Counting BFS over canonical keys with early abort; used where no
// closed form is worth maintaining (lamplighter).
std::size_t counted_bfs(const GraphSpec& spec, int radius, std::size_t cap) {
    std::unordered_map<std::string, int> seen;
    std::deque<std::pair<std::string, int>> queue;
    const std::string o = origin_key(spec);
    seen.emplace(o, 0);
    queue.emplace_back(o, 0);
    while (!queue.empty()) {
        auto [key, d] = std::move(queue.front());
        queue.pop_front();
        if (d == radius) continue;
        for (const auto& [nk, lab] : neighbor_keys(spec, key)) {
            (void)lab;
            if (seen.emplace(nk, d + 1).second) {
                if (seen.size() > cap) return cap + 1;
                queue.emplace_back(nk, d + 1);
            }
        }
    }
    return seen.size();
}

} // namespace

std::size_t ball_size_bound(const GraphSpec& spec, int radius, const BallLimits& limits) {
    spec.validate();
    if (radius < 0) fail("radius: must be >= 0");
    const std::size_t cap = limits.max_vertices;
    switch (spec.family) {
    case Family::lattice: {
        std::size_t side = 2 * static_cast<std::size_t>(radius) + 1, total = 1;
        for (int d = 0; d < spec.dim; ++d) total = capped_mul(total, side, cap);
        return total;
    }
    case Family::torus: {
        std::size_t total = 1;
        for (int d = 0; d < spec.dim; ++d)
            total = capped_mul(total, static_cast<std::size_t>(spec.side), cap);
        return total;
    }
    case Family::regular_tree:
    case Family::fixed_end_tree: return tree_ball_count(spec.branching, radius, cap);
    case Family::free_group: return tree_ball_count(2 * spec.rank, radius, cap);
    case Family::free_product_z2z2: return z2z2_ball_count(radius, cap);
    case Family::product: {
        const std::size_t a = ball_size_bound(*spec.left, radius, limits);
        const std::size_t b = ball_size_bound(*spec.right, radius, limits);
        return capped_mul(a, b, cap);
    }
    case Family::lamplighter: return counted_bfs(spec, radius, cap);
    }
    return cap + 1;
}

// ---- ball construction ----

GraphBall build_ball(const GraphSpec& spec, int radius, const BallLimits& limits) {
    spec.validate();
    if (radius < 0) fail("radius: must be >= 0");
    const bool is_torus = spec.family == Family::torus;
    int effective_radius = radius;
    if (is_torus) // the quotient is finite; BFS exhausts it
        effective_radius = spec.dim * (spec.side / 2 + 1);

    const std::size_t bound = ball_size_bound(spec, effective_radius, limits);
    if (bound > limits.max_vertices)
        fail("radius: ball size bound " + int_str(static_cast<long long>(bound)) +
             " exceeds max_vertices " + int_str(static_cast<long long>(limits.max_vertices)));
    const std::size_t edge_bound =
        capped_mul(bound, static_cast<std::size_t>(spec.degree()), limits.max_edges * 2) / 2;
    if (edge_bound > limits.max_edges)
        fail("radius: edge bound exceeds max_edges");

    GraphBall ball;
    ball.spec = spec;

    // BFS for distances.
    std::unordered_map<std::string, int> dist_of;
    dist_of.reserve(bound * 2);
    std::deque<std::string> queue;
    const std::string o = origin_key(spec);
    dist_of.emplace(o, 0);
    queue.push_back(o);
    int max_dist = 0;
    while (!queue.empty()) {
        std::string key = std::move(queue.front());
        queue.pop_front();
        const int d = dist_of[key];
        max_dist = std::max(max_dist, d);
        if (d == effective_radius) continue;
        for (const auto& [nk, lab] : neighbor_keys(spec, key)) {
            (void)lab;
            if (dist_of.emplace(nk, d + 1).second) queue.push_back(nk);
        }
    }
    ball.radius = is_torus ? max_dist : radius;

    // Canonical vertex order: (distance, encoding).
    std::vector<std::pair<int, std::string>> order;
    order.reserve(dist_of.size());
    for (const auto& [key, d] : dist_of) order.emplace_back(d, key);
    std::sort(order.begin(), order.end());

    const std::size_t n = order.size();
    ball.keys.resize(n);
    ball.dist.resize(n);
    ball.boundary.assign(n, false);
    ball.index_of.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        ball.dist[i] = order[i].first;
        ball.keys[i] = std::move(order[i].second);
        ball.index_of.emplace(ball.keys[i], static_cast<int>(i));
        if (!is_torus && ball.dist[i] == radius) ball.boundary[i] = true;
    }
    ball.origin = 0; // distance 0 sorts first and is unique

    // Edges, discovered from the lower-index endpoint.
    ball.adj.assign(n, {});
    ball.incident.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [nk, lab] : neighbor_keys(spec, ball.keys[i])) {
            auto it = ball.index_of.find(nk);
            if (it == ball.index_of.end()) continue;
            const int j = it->second;
            if (static_cast<int>(i) < j) {
                BallEdge e;
                e.u = static_cast<int>(i);
                e.v = j;
                e.label = lab;
                ball.edges.push_back(std::move(e));
            }
        }
    }
    std::sort(ball.edges.begin(), ball.edges.end(), [](const BallEdge& a, const BallEdge& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    // Collapse duplicates (two generator routes to one unordered pair can
    // only arise on small tori; the edge is still a single edge).
    ball.edges.erase(std::unique(ball.edges.begin(), ball.edges.end(),
                                 [](const BallEdge& a, const BallEdge& b) {
                                     return a.u == b.u && a.v == b.v;
                                 }),
                     ball.edges.end());
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid) {
        auto& e = ball.edges[eid];
        e.base_hash = edge_hash(ball.keys[static_cast<std::size_t>(e.u)],
                                ball.keys[static_cast<std::size_t>(e.v)]);
        ball.adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        ball.adj[static_cast<std::size_t>(e.v)].push_back(e.u);
        ball.incident[static_cast<std::size_t>(e.u)].emplace_back(static_cast<int>(eid), e.v);
        ball.incident[static_cast<std::size_t>(e.v)].emplace_back(static_cast<int>(eid), e.u);
    }
    for (auto& a : ball.adj) std::sort(a.begin(), a.end());

    if (spec.family == Family::fixed_end_tree) {
        ball.height.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            EndTreeVertex v = parse_end_tree(ball.keys[i]);
            ball.height[i] = static_cast<int>(v.digits.size()) - v.ups;
        }
    }
    return ball;
}

GraphBall quotient_torus(int dim, int side, const BallLimits& limits) {
    return build_ball(GraphSpec::make_torus(dim, side), 0, limits);
}

int GraphBall::index(const std::string& key) const {
    auto it = index_of.find(key);
    return it == index_of.end() ? -1 : it->second;
}

const std::vector<int>& GraphBall::neighbors(int v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= adj.size())
        fail("vertex: index out of range");
    return adj[static_cast<std::size_t>(v)];
}

int end_height(const GraphBall& ball, int v) {
    if (ball.spec.family != Family::fixed_end_tree)
        fail("family: end_height requires fixed_end_tree");
    if (v < 0 || static_cast<std::size_t>(v) >= ball.height.size())
        fail("vertex: index out of range");
    return ball.height[static_cast<std::size_t>(v)];
}

} // namespace percolab
