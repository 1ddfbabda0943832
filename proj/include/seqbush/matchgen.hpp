#pragma once

// Matching-sequence generation for ridesharing driver/passenger groups.

#include "seqbush/netio.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace seqbush {

enum class TaskKind { DriverDepart, DriverArrive, Pickup, Dropoff };
const char* task_kind_name(TaskKind k);

struct Task {
    TaskKind kind = TaskKind::DriverDepart;
    int node = 0;
    OD od;
    // Index into MatchingSequence::passengers for pickups/dropoffs, -1 for driver tasks.
    int passenger = -1;
    bool operator==(const Task&) const = default;
};

struct PassengerVisit {
    OD od;
    int pickup = 0;  // task index
    int dropoff = 0; // task index
};

/// Ordered driver itinerary. Levels are numbered 1..L; level l runs from task l-1 to task l.
struct MatchingSequence {
    int id = -1;
    OD driver;
    std::vector<Task> tasks;
    std::vector<PassengerVisit> passengers;
    std::vector<int> occupancy; // after each task, size L+1
    std::vector<int> B;         // per level 1..L stored at [l-1]; -1 empty, 0 loaded
    double R = 0.0;             // platform objective (distance saving)
    double free_flow_time = 0.0;

    int level_count() const { return static_cast<int>(tasks.size()) - 1; }
    /// Passengers on board while traversing level l (1-based).
    int onboard(int level) const { return occupancy[level - 1]; }
    std::vector<int> nodes() const;
    bool is_solo() const { return passengers.empty(); }
    /// Number of served passengers with this OD.
    int passenger_count(const OD& od) const;
    /// Distinct passenger ODs with multiplicities, sorted.
    std::vector<std::pair<OD, int>> passenger_groups() const;
    // Pickup / drop-off incidence: 1 when task l starts (s1) or ends (s_minus1) the trip of `od`.
    int s1(int task, const OD& od) const;
    int s_minus1(int task, const OD& od) const;
    std::string label() const;
};

/// Raised by occupancy_profile on structurally invalid task lists.
class InfeasibleSequence : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct OccupancyProfile {
    std::vector<int> occupancy;
    std::vector<int> B;
};

OccupancyProfile occupancy_profile(const MatchingSequence& seq);

struct RdRpGroup {
    OD driver;
    std::vector<OD> passengers; // sorted multiset
    std::vector<MatchingSequence> sequences;
    bool feasible() const { return !sequences.empty(); }
};

struct GenerationOptions {
    int capacity = 2;
    int max_passengers = 2;
    double detour_factor = 1.5;
    // Ride-time bound per passenger relative to their own shortest time; 0 disables it.
    double passenger_detour_factor = 0.0;
};

/// All task interleavings of `group` that satisfy capacity, pickup-before-dropoff and detour bounds.
/// Same-OD passengers are served first-in first-out, so identical node sequences are not repeated.
std::vector<MatchingSequence> generate_sequences(const RdRpGroup& group, const GenerationOptions& opt,
                                                 const SkimMatrix& skim);

/// Incremental group growth: a group of size k is kept when every size k-1 subgroup was feasible and
/// it has a feasible sequence. The empty (solo) group comes first.
std::vector<RdRpGroup> enumerate_groups(const OD& driver, const std::vector<OD>& candidate_passengers,
                                        const GenerationOptions& opt, const SkimMatrix& skim);

/// Distance saving of the sequence against everyone travelling alone.
double sequence_vkt_saving(const MatchingSequence& seq, const SkimMatrix& skim);

struct PoolOptions {
    GenerationOptions generation;
    bool require_positive_saving = false;
    // Keep the best sequences per driver OD by saving (0 keeps all).
    int max_sequences_per_driver = 0;
    // Restrict passengers to ODs within this many candidate partners per driver (0 keeps all).
    int max_candidate_passengers = 0;
};

/// Sequence pool over all driver ODs. Solo sequences are excluded: driving alone is the quit option.
/// Ids are assigned contiguously in (driver OD, generation) order.
std::vector<MatchingSequence> build_sequence_pool(const std::vector<OD>& driver_ods,
                                                  const std::vector<OD>& passenger_ods, const PoolOptions& opt,
                                                  const SkimMatrix& skim);

void write_sequence_dump(std::ostream& out, const std::vector<MatchingSequence>& seqs);
std::vector<MatchingSequence> read_sequence_dump(std::istream& in);

/// Rebuilds derived fields (occupancy, B, passenger indices) from the task list.
void refresh_sequence(MatchingSequence& seq, const SkimMatrix* skim);

} // namespace seqbush
