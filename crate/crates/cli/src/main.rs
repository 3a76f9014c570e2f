use clap::Parser;
use xcube_cli::{exit, run, Cli};
use xcube_core::ensemble::RunControl;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let budget = match &cli.command {
        xcube_cli::Command::Simulate(args) => match args.resolve() {
            Ok(run) => run.config.budget,
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(e.exit_code());
            }
        },
        _ => None,
    };
    let control = RunControl::new(budget);
    let flag = control.interrupt_flag();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, std::sync::atomic::Ordering::SeqCst)) {
        log::warn!("cannot install the interrupt handler: {e}");
    }
    let code = match run(&cli, &control) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
