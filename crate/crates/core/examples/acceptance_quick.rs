//! Run the acceptance suite with the reduced transversality scan.

fn main() {
    let reports = al_lab::acceptance::run_all(true);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
}
