#pragma once

#include <deque>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "jitr/money.hpp"

namespace jitr {

enum class LifecycleState {
    Detecting,
    Collecting,
    Searching,
    Training,
    Shadow,
    Offered,
    Deployed,
    Degraded,
    RolledBack,
    Abandoned,
};

inline std::string to_string(LifecycleState s) {
    switch (s) {
        case LifecycleState::Detecting: return "DETECTING";
        case LifecycleState::Collecting: return "COLLECTING";
        case LifecycleState::Searching: return "SEARCHING";
        case LifecycleState::Training: return "TRAINING";
        case LifecycleState::Shadow: return "SHADOW";
        case LifecycleState::Offered: return "OFFERED";
        case LifecycleState::Deployed: return "DEPLOYED";
        case LifecycleState::Degraded: return "DEGRADED";
        case LifecycleState::RolledBack: return "ROLLED_BACK";
        case LifecycleState::Abandoned: return "ABANDONED";
    }
    return "DETECTING";
}

inline LifecycleState lifecycle_from_string(const std::string& s) {
    if (s == "COLLECTING") return LifecycleState::Collecting;
    if (s == "SEARCHING") return LifecycleState::Searching;
    if (s == "TRAINING") return LifecycleState::Training;
    if (s == "SHADOW") return LifecycleState::Shadow;
    if (s == "OFFERED") return LifecycleState::Offered;
    if (s == "DEPLOYED") return LifecycleState::Deployed;
    if (s == "DEGRADED") return LifecycleState::Degraded;
    if (s == "ROLLED_BACK") return LifecycleState::RolledBack;
    if (s == "ABANDONED") return LifecycleState::Abandoned;
    return LifecycleState::Detecting;
}

enum class TaskEvent {
    RecurrenceConfirmed,
    DatasetReady,
    RankingReady,
    ArtifactReady,
    AgreementMet,
    AgreementLow,
    OfferAccepted,
    OfferRejected,
    DriftDetected,
    RollbackDone,
    ResumeCollecting,
};

inline std::string to_string(TaskEvent e) {
    switch (e) {
        case TaskEvent::RecurrenceConfirmed: return "recurrence_confirmed";
        case TaskEvent::DatasetReady: return "dataset_ready";
        case TaskEvent::RankingReady: return "ranking_ready";
        case TaskEvent::ArtifactReady: return "artifact_ready";
        case TaskEvent::AgreementMet: return "agreement_met";
        case TaskEvent::AgreementLow: return "agreement_low";
        case TaskEvent::OfferAccepted: return "offer_accepted";
        case TaskEvent::OfferRejected: return "offer_rejected";
        case TaskEvent::DriftDetected: return "drift_detected";
        case TaskEvent::RollbackDone: return "rollback_done";
        case TaskEvent::ResumeCollecting: return "resume_collecting";
    }
    return "unknown";
}

struct IllegalTransitionError : std::runtime_error {
    IllegalTransitionError(LifecycleState s, TaskEvent e)
        : std::runtime_error("illegal transition: event '" + to_string(e) + "' in state '" +
                             to_string(s) + "'") {}
};

// The task lifecycle edge map. Anything not listed is an error that names
// both the state and the event.
inline LifecycleState advance(LifecycleState state, TaskEvent event) {
    using S = LifecycleState;
    using E = TaskEvent;
    switch (state) {
        case S::Detecting:
            if (event == E::RecurrenceConfirmed) return S::Collecting;
            break;
        case S::Collecting:
            if (event == E::DatasetReady) return S::Searching;
            break;
        case S::Searching:
            if (event == E::RankingReady) return S::Training;
            break;
        case S::Training:
            if (event == E::ArtifactReady) return S::Shadow;
            break;
        case S::Shadow:
            if (event == E::AgreementMet) return S::Offered;
            if (event == E::AgreementLow) return S::Collecting;
            break;
        case S::Offered:
            if (event == E::OfferAccepted) return S::Deployed;
            if (event == E::OfferRejected) return S::Abandoned;
            break;
        case S::Deployed:
            if (event == E::DriftDetected) return S::Degraded;
            break;
        case S::Degraded:
            if (event == E::RollbackDone) return S::RolledBack;
            break;
        case S::RolledBack:
            if (event == E::ResumeCollecting) return S::Collecting;
            break;
        case S::Abandoned:
            break;
    }
    throw IllegalTransitionError(state, event);
}

// Rolling label-agreement measurement between the surrogate and the LLM,
// with latency aggregates for both sides.
struct AgreementReport {
    int window_size = 0;
    int observed = 0;
    double agreement = 0.0;
    double surrogate_latency_mean_ms = 0.0;
    double llm_latency_mean_ms = 0.0;
    bool complete = false;
};

class AgreementWindow {
public:
    explicit AgreementWindow(int capacity) : capacity_(capacity) {
        if (capacity <= 0) throw std::invalid_argument("window size must be positive");
    }

    void add(bool match, double surrogate_latency_ms, double llm_latency_ms) {
        entries_.push_back({match, surrogate_latency_ms, llm_latency_ms});
        if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
    }

    void clear() { entries_.clear(); }
    int observed() const { return static_cast<int>(entries_.size()); }
    bool full() const { return observed() >= capacity_; }

    AgreementReport report() const {
        AgreementReport r;
        r.window_size = capacity_;
        r.observed = observed();
        r.complete = full();
        if (entries_.empty()) return r;
        int matches = 0;
        double s_lat = 0.0, l_lat = 0.0;
        for (const auto& e : entries_) {
            matches += e.match ? 1 : 0;
            s_lat += e.surrogate_latency_ms;
            l_lat += e.llm_latency_ms;
        }
        r.agreement = static_cast<double>(matches) / static_cast<double>(entries_.size());
        r.surrogate_latency_mean_ms = s_lat / static_cast<double>(entries_.size());
        r.llm_latency_mean_ms = l_lat / static_cast<double>(entries_.size());
        return r;
    }

private:
    struct Entry {
        bool match;
        double surrogate_latency_ms;
        double llm_latency_ms;
    };
    int capacity_;
    std::deque<Entry> entries_;
};

enum class OfferStatus { Pending, Accepted, Rejected, Expired };

inline std::string to_string(OfferStatus s) {
    switch (s) {
        case OfferStatus::Pending: return "pending";
        case OfferStatus::Accepted: return "accepted";
        case OfferStatus::Rejected: return "rejected";
        case OfferStatus::Expired: return "expired";
    }
    return "pending";
}

inline OfferStatus offer_status_from_string(const std::string& s) {
    if (s == "accepted") return OfferStatus::Accepted;
    if (s == "rejected") return OfferStatus::Rejected;
    if (s == "expired") return OfferStatus::Expired;
    return OfferStatus::Pending;
}

struct Offer {
    std::string offer_id;
    std::string task_id;
    std::string current_model;
    std::string surrogate_description;
    Money savings_per_1m;
    double agreement = 0.0;
    OfferStatus status = OfferStatus::Pending;
    std::string text;
    int64_t created_at_ms = 0;
};

inline std::string offer_text(const std::string& current_model, const std::string& surrogate_desc,
                              Money savings_per_1m) {
    return "You are currently using a " + current_model +
           " model. By pressing \"accept\", you can switch to a custom " + surrogate_desc +
           " model that delivers the same accuracy and lower latency while saving you " +
           format_usd(savings_per_1m, 2) + " per one million requests.";
}

inline nlohmann::json to_json(const Offer& o) {
    return nlohmann::json{{"offer_id", o.offer_id},
                          {"task_id", o.task_id},
                          {"current_model", o.current_model},
                          {"surrogate_description", o.surrogate_description},
                          {"savings_per_1m_usd", format_usd(o.savings_per_1m)},
                          {"savings_per_1m_pico", o.savings_per_1m.pico},
                          {"agreement", o.agreement},
                          {"status", to_string(o.status)},
                          {"text", o.text},
                          {"created_at_ms", o.created_at_ms}};
}

inline Offer offer_from_json(const nlohmann::json& j) {
    Offer o;
    o.offer_id = j.at("offer_id").get<std::string>();
    o.task_id = j.at("task_id").get<std::string>();
    o.current_model = j.value("current_model", std::string{});
    o.surrogate_description = j.value("surrogate_description", std::string{});
    o.savings_per_1m = Money{j.value("savings_per_1m_pico", int64_t{0})};
    o.agreement = j.value("agreement", 0.0);
    o.status = offer_status_from_string(j.value("status", std::string{"pending"}));
    o.text = j.value("text", std::string{});
    o.created_at_ms = j.value("created_at_ms", int64_t{0});
    return o;
}

} // namespace jitr
