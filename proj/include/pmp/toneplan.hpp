#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <json.hpp>

#include "pmp/errors.hpp"

namespace pmp {

/// Partition of the W OFDM tones into data-carrying (active) and spectrally
/// nulled (inactive) sets. Tones are identified by DFT bin index in [0, W).
struct TonePlan {
    std::size_t tones = 0;                 // W
    std::vector<std::size_t> active;       // ascending bin indices
    std::vector<std::size_t> inactive;     // ascending complement

    static TonePlan from_active(std::size_t w, std::vector<std::size_t> bins) {
        if (w == 0) throw ConfigError("W", "must be positive");
        if (bins.empty()) throw ConfigError("active", "at least one active tone required");
        std::sort(bins.begin(), bins.end());
        for (std::size_t i = 0; i < bins.size(); ++i) {
            if (bins[i] >= w) throw ConfigError("active", "tone index out of range");
            if (i > 0 && bins[i] == bins[i - 1]) throw ConfigError("active", "duplicate tone index");
        }
        TonePlan plan;
        plan.tones = w;
        plan.active = std::move(bins);
        std::size_t next = 0;
        for (std::size_t bin = 0; bin < w; ++bin) {
            if (next < plan.active.size() && plan.active[next] == bin)
                ++next;
            else
                plan.inactive.push_back(bin);
        }
        return plan;
    }

    static TonePlan all_active(std::size_t w) {
        std::vector<std::size_t> bins(w);
        for (std::size_t i = 0; i < w; ++i) bins[i] = i;
        return from_active(w, std::move(bins));
    }

    /// IEEE 802.11n 40 MHz spectral map over W = 128: occupied subcarriers
    /// +-2..+-58 minus the pilot positions +-11, +-25, +-53 (pilots are
    /// treated as inactive), which leaves 108 data tones. DC-centered logical
    /// index l maps to DFT bin (l mod 128).
    static TonePlan ieee80211n_40mhz() {
        std::vector<std::size_t> bins;
        for (int l = -58; l <= 58; ++l) {
            const int a = std::abs(l);
            if (a < 2 || a > 58) continue;
            if (a == 11 || a == 25 || a == 53) continue;
            bins.push_back(static_cast<std::size_t>((l + 128) % 128));
        }
        return from_active(128, std::move(bins));
    }

    nlohmann::json to_json() const {
        return {{"W", tones}, {"active", active}};
    }

    static TonePlan from_json(const nlohmann::json& j) {
        const auto as_uint = [](const nlohmann::json& v, const char* field) -> std::size_t {
            if (!v.is_number_integer() && !v.is_number_unsigned())
                throw ConfigError(field, "must be a nonnegative integer");
            if (v.is_number_integer() && v.get<long long>() < 0)
                throw ConfigError(field, "must be a nonnegative integer");
            return v.get<std::size_t>();
        };
        if (!j.is_object()) throw ConfigError("tone_plan", "expected an object");
        for (const auto& item : j.items())
            if (item.key() != "W" && item.key() != "active")
                throw ConfigError(item.key(), "unknown key in tone plan");
        if (!j.contains("W")) throw ConfigError("W", "missing");
        if (!j.contains("active") || !j["active"].is_array())
            throw ConfigError("active", "missing or not an array");
        std::vector<std::size_t> bins;
        for (const auto& b : j["active"]) bins.push_back(as_uint(b, "active"));
        return from_active(as_uint(j["W"], "W"), std::move(bins));
    }
};

}  // namespace pmp
