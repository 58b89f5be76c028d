use clap::Parser;

fn main() {
    let cfg = adscausal::cli::JobConfig::try_parse().unwrap_or_else(|e| {
        let _ = e.print();
        std::process::exit(if e.use_stderr() { 2 } else { 0 });
    });
    std::process::exit(adscausal::cli::run(&cfg) as i32);
}
