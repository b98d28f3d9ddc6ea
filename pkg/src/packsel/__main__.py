from packsel.cli import main

main()
