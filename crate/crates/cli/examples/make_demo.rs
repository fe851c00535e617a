//! Writes a demo input set: `cargo run -p surveyforge-cli --example make_demo -- <dir> [seed]`.

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "demo".into());
    let seed = args.next().map_or(2016, |s| s.parse().expect("seed must be an integer"));
    if let Err(e) = surveyforge_cli::demo::write_demo(std::path::Path::new(&dir), seed) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    println!("demo inputs written to {dir}");
}
