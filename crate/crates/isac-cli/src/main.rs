use isac_cli::parse_and_run;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(parse_and_run(&args));
}
