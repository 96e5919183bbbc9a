//! Complete and vertical lifts on the affine-group fixture: the lift
//! identities, flow duality between A and A*, and equivariance of ψ.

use algred::config::Settings;
use algred::fixtures;
use algred::lifts::{check_cv_relations, check_flow_duality, complete_lift_dual};
use algred::symexpr::Expr;

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-act").unwrap();
    let model = f.model.clone().validated().unwrap();

    let x = model.section(vec![Expr::one(), Expr::zero(), Expr::var("a"), Expr::zero()]).unwrap();
    let lift = complete_lift_dual(&model, &x).unwrap();
    println!("complete lift to A* of e1 + a e3:");
    for (v, c) in lift.coords.iter().zip(&lift.comps) {
        println!("  d/d{v}: {c}");
    }

    for r in check_cv_relations(&model, &s).unwrap() {
        println!("{r}");
    }
    println!("{}", check_flow_duality(&model, &x, 0.5, &s, 10).unwrap());
    let act = f.action.unwrap().validated().unwrap();
    println!("{}", act.check_psi_equivariance(&s, 50).unwrap());
}
