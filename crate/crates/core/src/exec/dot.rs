use std::fmt::Write;

use super::OperatorPlan;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering of an operator plan: one `cluster_<op>` subgraph per
/// relational operator, one node per instruction, edges along slots.
pub fn to_dot(plan: &OperatorPlan) -> String {
    let mut out = String::from("digraph operator_plan {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n");
    for step in &plan.steps {
        let _ = writeln!(out, "  subgraph cluster_{} {{", step.op_id);
        let title = if step.label.is_empty() {
            format!("{} #{}", step.op, step.op_id)
        } else {
            format!("{} #{}: {}", step.op, step.op_id, step.label)
        };
        let _ = writeln!(out, "    label=\"{}\";", escape(&title));
        let _ = writeln!(out, "    style=rounded;");
        if step.instrs.is_empty() {
            // Graphviz drops empty clusters.
            let _ = writeln!(out, "    op{} [label=\"(reuses input columns)\", shape=plaintext];", step.op_id);
        }
        for a in &step.instrs {
            let detail = a.instr.detail();
            let text = if detail.is_empty() {
                format!("%{} {}", a.out, a.instr.name())
            } else {
                format!("%{} {}\\n{}", a.out, a.instr.name(), escape(&detail))
            };
            let shape = if a.instr.is_kernel() { "box" } else { "ellipse" };
            let _ = writeln!(out, "    s{} [label=\"{}\", shape={shape}];", a.out, text);
        }
        out.push_str("  }\n");
    }
    for step in &plan.steps {
        for a in &step.instrs {
            let mut reads = a.instr.reads();
            reads.dedup();
            for r in reads {
                let _ = writeln!(out, "  s{r} -> s{};", a.out);
            }
        }
    }
    out.push_str("  result [shape=doublecircle, label=\"result\"];\n");
    for o in &plan.outputs {
        let _ = writeln!(out, "  s{} -> result [label=\"{}\"];", o.slot, escape(&o.name));
    }
    out.push_str("}\n");
    out
}
