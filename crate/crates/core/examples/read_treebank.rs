//! Parses CoNLL-U text, skipping comments, multiword ranges and empty nodes,
//! and shows what a malformed sentence reports.

use sgnet::conllu::{parse_conllu, parse_minimal};

const TEXT: &str = "# sent_id = 1
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\t_\t_\t_\t_\t3\taux\t_\t_
2\tn't\t_\t_\t_\t_\t3\tadvmod\t_\t_
3\tstop\t_\t_\t_\t_\t0\troot\t_\t_
3.1\tnow\t_\t_\t_\t_\t_\t_\t_\t_

";

fn main() {
    let trees = parse_conllu(TEXT).expect("valid treebank");
    for t in &trees {
        print!("{}", t.to_conllu());
        println!("depths: {:?}", (1..=t.len()).map(|i| t.depth(i)).collect::<Vec<_>>());
    }

    let broken = "1\ta\t_\t_\t_\t_\t2\t_\t_\t_\n2\tb\t_\t_\t_\t_\t1\t_\t_\t_\n";
    match parse_conllu(broken) {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("error: {e}"),
    }

    match parse_minimal("1\tthe\t2\n2\tcat\t3\n3\tsat\t0\n") {
        Ok(ts) => println!("minimal format: heads {:?}", ts[0].heads()),
        Err(e) => println!("error: {e}"),
    }
}
