use tankstab::acceptance::run;

fn main() {
    let mut failed = 0;
    for id in 1..=12 {
        let o = run(id);
        println!("{}", o.line());
        failed += usize::from(!o.pass);
    }
    println!("{} of 12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
