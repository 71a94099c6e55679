from uclust3.cli import main

main()
