from heisrect.cli import main

main()
