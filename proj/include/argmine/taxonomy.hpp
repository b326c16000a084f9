#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "argmine/error.hpp"

namespace argmine {

enum class ClaimType : std::uint8_t {
    Neutral,
    ExplicitSupport,
    LikelySupport,
    ExplicitOpposition,
    LikelyOpposition,
    Burdensome,
    LacksFlexibility,
    NotSufficientTime,
    ConflictingInterests,
    DisputedInformation,
    LegalChallenge,
    Overreach,
    RequestsClarification,
    LacksClarity,
    SeeksExclusion,
    TooBroad,
    TooNarrow,
};

inline constexpr std::size_t kClaimTypeCount = 17;

enum class Stance : std::uint8_t { Neutral, Support, Opposition };

inline constexpr std::array<ClaimType, kClaimTypeCount> all_claim_types() {
    std::array<ClaimType, kClaimTypeCount> out{};
    for (std::size_t i = 0; i < kClaimTypeCount; ++i) out[i] = static_cast<ClaimType>(i);
    return out;
}

inline std::string_view to_string(ClaimType t) {
    static constexpr std::array<std::string_view, kClaimTypeCount> names = {
        "Neutral", "ExplicitSupport", "LikelySupport", "ExplicitOpposition", "LikelyOpposition",
        "Burdensome", "LacksFlexibility", "NotSufficientTime", "ConflictingInterests",
        "DisputedInformation", "LegalChallenge", "Overreach", "RequestsClarification",
        "LacksClarity", "SeeksExclusion", "TooBroad", "TooNarrow"};
    return names[static_cast<std::size_t>(t)];
}

inline std::string_view to_string(Stance s) {
    switch (s) {
    case Stance::Support: return "Support";
    case Stance::Opposition: return "Opposition";
    default: return "Neutral";
    }
}

namespace detail {
inline std::string fold_name(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '_' || c == '-' || c == ' ') continue;
        out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    }
    return out;
}
} // namespace detail

// Accepts "LegalChallenge", "LEGAL_CHALLENGE", "legal-challenge", ...
inline std::optional<ClaimType> parse_claim_type(std::string_view s) {
    const std::string folded = detail::fold_name(s);
    for (ClaimType t : all_claim_types()) {
        if (detail::fold_name(to_string(t)) == folded) return t;
    }
    return std::nullopt;
}

inline ClaimType claim_type_from_string(std::string_view s) {
    if (auto t = parse_claim_type(s)) return *t;
    throw ValidationError("unknown claim type '" + std::string(s) + "'");
}

inline std::optional<Stance> parse_stance(std::string_view s) {
    const std::string folded = detail::fold_name(s);
    if (folded == "neutral") return Stance::Neutral;
    if (folded == "support") return Stance::Support;
    if (folded == "opposition" || folded == "oppose") return Stance::Opposition;
    return std::nullopt;
}

struct TaxonomyNode {
    ClaimType id;
    Stance stance;
    std::optional<ClaimType> parent;
};

// Claim hierarchy: Neutral, two Support types, fourteen Opposition types.
// Four Opposition types qualify another claim and sit one level deeper.
// Immutable once constructed.
class Taxonomy {
public:
    static Taxonomy builtin() {
        using C = ClaimType;
        const auto S = Stance::Support;
        const auto O = Stance::Opposition;
        std::vector<TaxonomyNode> nodes = {
            {C::Neutral, Stance::Neutral, std::nullopt},
            {C::ExplicitSupport, S, std::nullopt},
            {C::LikelySupport, S, std::nullopt},
            {C::ExplicitOpposition, O, std::nullopt},
            {C::LikelyOpposition, O, std::nullopt},
            {C::Burdensome, O, std::nullopt},
            {C::LacksFlexibility, O, C::Burdensome},
            {C::NotSufficientTime, O, C::Burdensome},
            {C::ConflictingInterests, O, std::nullopt},
            {C::DisputedInformation, O, std::nullopt},
            {C::LegalChallenge, O, std::nullopt},
            {C::Overreach, O, std::nullopt},
            {C::RequestsClarification, O, std::nullopt},
            {C::LacksClarity, O, C::RequestsClarification},
            {C::SeeksExclusion, O, C::RequestsClarification},
            {C::TooBroad, O, std::nullopt},
            {C::TooNarrow, O, std::nullopt},
        };
        return Taxonomy(std::move(nodes));
    }

    explicit Taxonomy(std::vector<TaxonomyNode> nodes) {
        if (nodes.size() != kClaimTypeCount) {
            throw ValidationError("taxonomy must define exactly 17 nodes, got " + std::to_string(nodes.size()));
        }
        std::array<bool, kClaimTypeCount> seen{};
        for (const auto& n : nodes) {
            const auto i = static_cast<std::size_t>(n.id);
            if (seen[i]) throw ValidationError("duplicate taxonomy node " + std::string(to_string(n.id)));
            seen[i] = true;
            nodes_[i] = n;
        }
        for (const auto& n : nodes_) {
            if (n.id == ClaimType::Neutral) {
                if (n.stance != Stance::Neutral || n.parent) {
                    throw ValidationError("Neutral must have neutral stance and no parent");
                }
                continue;
            }
            if (n.stance == Stance::Neutral) {
                throw ValidationError(std::string(to_string(n.id)) + " must be Support or Opposition");
            }
            if (n.parent) {
                const auto& p = nodes_[static_cast<std::size_t>(*n.parent)];
                if (p.stance != n.stance) {
                    throw ValidationError(std::string(to_string(n.id)) + " does not share its parent's stance");
                }
            }
        }
        for (ClaimType t : all_claim_types()) depth_[static_cast<std::size_t>(t)] = compute_depth(t);
    }

    const TaxonomyNode& node(ClaimType t) const { return nodes_[static_cast<std::size_t>(t)]; }

    Stance stance_of(ClaimType t) const { return node(t).stance; }

    std::optional<ClaimType> parent_of(ClaimType t) const { return node(t).parent; }

    int depth(ClaimType t) const { return depth_[static_cast<std::size_t>(t)]; }

    std::vector<ClaimType> members(Stance s) const {
        if (s == Stance::Neutral) throw ValidationError("the Neutral stance has no argument members");
        std::vector<ClaimType> out;
        for (const auto& n : nodes_) {
            if (n.stance == s) out.push_back(n.id);
        }
        return out;
    }

    // Argumentative types in declaration order (everything but Neutral).
    std::vector<ClaimType> claims() const {
        std::vector<ClaimType> out;
        for (const auto& n : nodes_) {
            if (n.id != ClaimType::Neutral) out.push_back(n.id);
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& n : nodes_) {
            arr.push_back({{"id", to_string(n.id)},
                           {"stance", to_string(n.stance)},
                           {"parent", n.parent ? nlohmann::json(to_string(*n.parent)) : nlohmann::json(nullptr)}});
        }
        return arr;
    }

    // Accepts either a JSON array of node records or the same records one per line.
    static Taxonomy from_json(const nlohmann::json& arr) {
        if (!arr.is_array()) throw ValidationError("taxonomy must be an array of node records");
        std::vector<TaxonomyNode> nodes;
        for (const auto& rec : arr) {
            TaxonomyNode n{};
            n.id = claim_type_from_string(rec.at("id").get<std::string>());
            const auto st = parse_stance(rec.at("stance").get<std::string>());
            if (!st) throw ValidationError("bad stance in taxonomy record " + rec.dump());
            n.stance = *st;
            if (rec.contains("parent") && !rec["parent"].is_null()) {
                n.parent = claim_type_from_string(rec["parent"].get<std::string>());
            }
            nodes.push_back(n);
        }
        return Taxonomy(std::move(nodes));
    }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& rec : to_json()) out += rec.dump() + "\n";
        return out;
    }

    static Taxonomy from_jsonl(std::string_view text) {
        nlohmann::json arr = nlohmann::json::array();
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            std::string_view line = text.substr(pos, nl - pos);
            if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
                arr.push_back(nlohmann::json::parse(line));
            }
            pos = nl + 1;
        }
        return from_json(arr);
    }

private:
    int compute_depth(ClaimType t) const {
        if (t == ClaimType::Neutral) return 0;
        int d = 1;
        auto p = node(t).parent;
        while (p) {
            if (++d > static_cast<int>(kClaimTypeCount)) throw ValidationError("cycle in taxonomy parents");
            p = node(*p).parent;
        }
        return d;
    }

    std::array<TaxonomyNode, kClaimTypeCount> nodes_{};
    std::array<int, kClaimTypeCount> depth_{};
};

inline const Taxonomy& default_taxonomy() {
    static const Taxonomy t = Taxonomy::builtin();
    return t;
}

inline Stance stance_of(ClaimType t) { return default_taxonomy().stance_of(t); }
inline int depth(ClaimType t) { return default_taxonomy().depth(t); }
inline std::vector<ClaimType> members(Stance s) { return default_taxonomy().members(s); }

} // namespace argmine
