#pragma once

#include <string>
#include <vector>

#include "pigi/geometry.h"
#include "pigi/model.h"
#include "pigi/sexpr.h"

namespace pigi {

// World description language. One (world ...) form holding bounds, robot,
// surfaces, containers (with nested door and space), items, and extra
// wall rects. Serialization order is fixed, so serialize is canonical.
World2D parse_world(const std::string& text,
                    const std::string& filename = "<string>");
std::string serialize_world(const World2D& w);

// Problem description: (problem <name> (world "path") (objects ...)
// (init ...) (goal ...)). The returned Problem carries world_path but
// world is left null; load_problem resolves and validates it.
Problem parse_problem(const std::string& text,
                      const std::string& filename = "<string>");
std::string serialize_problem(const Problem& p);

World2D load_world(const std::string& path);
// Reads the problem, loads its world (path relative to the problem file),
// then validates structure, scene geometry, and the robot's start conf.
Problem load_problem(const std::string& path);

// Door angles and item positions implied by the init literals.
SceneState initial_scene(const Problem& p);

// Interpenetration check at tolerance 1e-6; raises GeometryError naming
// the overlapping pair. Also enforces joint limits and world bounds.
void validate_scene(const World2D& w, const SceneState& sc);

// Skeleton line format: (skeleton (<variant> <arg>...) ...), one per
// line in .skel files. Free parameters print as #<id>.
std::string serialize_skeleton(const Skeleton& s,
                               const std::vector<ObjectInfo>& objects);
Skeleton parse_skeleton(const std::string& line, const Problem& p,
                        const std::string& filename = "<string>");

// Stripped plan as (plan (<name> <obj>...) ...).
std::string serialize_stripped(const StrippedPlan& sp,
                               const std::vector<ObjectInfo>& objects);
StrippedPlan parse_stripped(const std::string& line, const Problem& p,
                            const std::string& filename = "<string>");

// Literal <-> s-expression, shared by the formats above.
SExpr literal_to_sexpr(const Literal& l,
                       const std::vector<ObjectInfo>& objects);
Literal literal_from_sexpr(const SExpr& e, const Problem& p);

std::string read_text_file(const std::string& path);
void save_text_file(const std::string& path, const std::string& text);

// RFC-4180 style quoting, LF line endings.
std::string to_csv(const std::vector<std::vector<std::string>>& rows);

}  // namespace pigi
